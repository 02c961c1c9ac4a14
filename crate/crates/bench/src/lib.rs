// benchmark-only crate
