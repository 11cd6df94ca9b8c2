//! Model theory over indefinitely extensible staged finite structures.
//!
//! A structure is a growing family of finite stages. Universal quantifiers
//! range over a single stage chosen large enough relative to the current
//! context of stage indices, instead of over a completed infinite domain.
//!
//! * [`indexing`]: contexts, horizon functions and the largeness relation.
//! * [`syntax`]: formulas, parser, printer and the finite fragments `L_k`.
//! * [`structures`]: staged universes, relation families, system maps.
//! * [`semantics`]: classical oracle, reflection evaluator, witness closure.
//! * [`kripke`]: staged Kripke models and reflection forcing.
//! * [`holapprox`]: finite approximations of higher-order objects.

pub mod holapprox;
pub mod indexing;
pub mod kripke;
pub mod semantics;
pub mod structures;
pub mod syntax;
