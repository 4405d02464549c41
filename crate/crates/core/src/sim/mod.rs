pub mod gdist;
pub mod settings;
pub mod study;
