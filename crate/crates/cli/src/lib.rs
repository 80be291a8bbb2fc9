//! Command-line front end and the HTTP consult service.

pub mod server;
