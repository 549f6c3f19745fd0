//! Online evaluation must not allocate anything of full-order size.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rbcert_core::benchmarks::{build_transport, TransportConfig};
use rbcert_core::bounds::{train_goal_oriented, TrainingConfig};
use rbcert_core::{Partition, ReducedModel};

struct Watch;

static ARMED: AtomicBool = AtomicBool::new(false);
static LARGEST: AtomicUsize = AtomicUsize::new(0);
static COUNT: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Watch {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        if ARMED.load(Ordering::Relaxed) {
            LARGEST.fetch_max(layout.size(), Ordering::Relaxed);
            COUNT.fetch_add(1, Ordering::Relaxed);
        }
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Watch = Watch;

#[test]
fn online_phase_stays_reduced() {
    let model = build_transport(&TransportConfig::default()).unwrap();
    let dim = model.dim();
    let rm = ReducedModel::build(&model, &model.domain().sample_seeded(40, 1), 10, true).unwrap();
    let part = Partition::trivial(model.domain().clone());
    let cfg = TrainingConfig { sample_size: 20, truncation: 10, corrected: true, seed: 3, t2_halved: false };
    let data = train_goal_oriented(&model, &rm, &part, &cfg).unwrap();
    let params = model.domain().sample_seeded(25, 4);

    ARMED.store(true, Ordering::SeqCst);
    let mut acc = 0.0;
    for mu in &params {
        let sol = rm.solve(mu).unwrap();
        acc += rm.output(&sol).unwrap();
        acc += rm.corrected_output(mu).unwrap();
        acc += data.evaluate(&rm, mu, 1e-3).unwrap().bound;
    }
    ARMED.store(false, Ordering::SeqCst);

    assert!(acc.is_finite());
    assert!(COUNT.load(Ordering::SeqCst) > 0);
    let largest = LARGEST.load(Ordering::SeqCst);
    assert!(largest < dim * std::mem::size_of::<f64>(), "allocation of {largest} bytes at dim {dim}");
}
