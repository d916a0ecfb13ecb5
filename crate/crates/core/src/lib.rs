//! Simulation and exhaustive verification of protocols that recover the
//! basis or outcome of an unrecorded projective measurement on a qudit of
//! odd prime dimension.
//!
//! The qudit is entangled with an ancilla in a maximally entangled state
//! (MES). After a hidden measurement of `K_b` on the first particle, a
//! two-particle control measurement in one of two conjugate MES bases
//! reveals either the basis `b` or, given `b`, the outcome `m`.
//!
//! Module map:
//! * [`zmod`]: exact arithmetic in Z_d.
//! * [`qstate`]: dense states, operators, Born rule, partial trace.
//! * [`mub`]: the `d + 1` mutually unbiased bases and `Z`, `X`, `K_b`.
//! * [`collective`]: collective coordinates and the two MES bases.
//! * [`protocol`]: the measurement episodes, modular inference and sweeps.
//! * [`oracle`]: brute-force amplitude cross-checks of the inference rules.
//! * [`cli`]: the `urm` command-line front end.

pub mod cli;
pub mod collective;
pub mod mub;
pub mod oracle;
pub mod protocol;
pub mod qstate;
pub mod zmod;
