//! Model problems: closed-form toys, boundary control, transport, and the
//! robust oscillator inference problem.

pub mod toy;
pub mod boundary;
pub mod transport;
pub mod loss;
pub mod oscillator;
