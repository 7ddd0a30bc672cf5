//! Front ends of the content-analysis workbench: the `cm` command line and
//! the HTTP service, both driving [`cm_core`].

pub mod analysis;
pub mod cli;
pub mod error;
pub mod server;
