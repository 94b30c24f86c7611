//! Frame codec and TCP transport for the login exchange.

pub mod frame;
pub mod net;

pub use frame::{
    decode_auth_response, decode_login_request, encode_auth_response, encode_login_request, Frame,
    MsgType, WireError,
};
pub use net::{
    client_login, exchange_raw, send_login_request, serve, AuditEntry, AuditLog, ClientError,
    ServeOptions, ServerHandle,
};
