//! Directional field design on triangle meshes with singularities placed on vertices,
//! edge points or face interiors.

pub mod bevel;
pub mod discretize;
pub mod field;
pub mod mesh;
pub mod prescribe;
pub mod qp;
pub mod solve;
pub mod sparse;
pub mod trace;

pub use num_complex::Complex64 as C64;

/// Sets the thread count used by the sparse factorizations. One thread runs sequentially.
pub fn set_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    let par = if threads > 1 { faer::Par::rayon(threads) } else { faer::Par::Seq };
    #[cfg(not(feature = "parallel"))]
    let par = {
        let _ = threads;
        faer::Par::Seq
    };
    faer::set_global_parallelism(par);
}
