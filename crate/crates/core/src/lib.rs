//! A lab implementation of a dynamic ID-based smartcard login scheme.
//!
//! The scheme's server recovers `h(PW)` from the login message and then checks
//! a value derived from that same recovered hash, so the check holds for any
//! typed password. [`attack`] reproduces this in batch, [`wire`] puts the
//! exchange on a real TCP channel.

pub mod attack;
pub mod bits;
pub mod clock;
pub mod protocol;
pub mod wire;

pub use bits::{
    embed_timestamp, hash, hash_bits, hash_password, xor, Bits, BitsError, HashId, Password,
    Timestamp, K_BITS, K_BYTES,
};
pub use clock::{Clock, FixedClock, SystemClock};
pub use protocol::{
    authenticate, change_password, issue_card, make_login_request, register_user, AuthDecision,
    AuthPolicy, AuthReason, LoginRequest, LoginVerifier, Server, ServerSecrets, SmartcardState,
};
