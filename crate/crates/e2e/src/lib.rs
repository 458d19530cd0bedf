//! Holds no code. The acceptance checks live in `tests/acceptance.rs`, kept
//! in their own package so they run after every other suite in the workspace.
