pub use aisets_core as core;
