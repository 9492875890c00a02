pub mod lef;
