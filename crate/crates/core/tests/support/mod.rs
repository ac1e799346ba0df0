#![allow(dead_code)]

pub mod grad_check;
pub mod qp_oracle;
pub mod invariants;
