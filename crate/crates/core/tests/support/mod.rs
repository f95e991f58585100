#![allow(dead_code)]

pub mod driver;
pub mod equivalence;
pub mod oracle;
