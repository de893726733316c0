// The guide chapters under book/src/ contain runnable code fences.
// Including them as doc comments here makes `cargo test --doc` compile
// and run every snippet, keeping the book in sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/random-fields.md")]
mod random_fields {}

#[doc = include_str!("../../../book/src/flows-and-operators.md")]
mod flows_and_operators {}

#[doc = include_str!("../../../book/src/particle-method.md")]
mod particle_method {}

#[doc = include_str!("../../../book/src/front-speeds.md")]
mod front_speeds {}

#[doc = include_str!("../../../book/src/eulerian-reference.md")]
mod eulerian_reference {}
