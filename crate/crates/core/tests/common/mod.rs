#![allow(dead_code)]

pub mod fixture;
pub mod oracles;
pub mod repo;
