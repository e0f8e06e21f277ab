//! Text generation: prompt templates, output schemas, providers and the gateway in front of them.

mod gateway;
mod http;
mod mock;
mod schema;
mod template;

pub use gateway::*;
pub use http::*;
pub use mock::*;
pub use schema::*;
pub use template::*;
