//! The four phases of the dynamic ID smartcard scheme: registration, login,
//! authentication and password change.
//!
//! Everything here is a pure function of its arguments. The server side keeps
//! no per-user state and never touches `x` after registration; the card keeps
//! no password verifier. Both properties are reproduced exactly, which is what
//! makes the login check hold for any typed password.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{embed_timestamp, hash_bits, hash_password, Bits, HashId, Password, Timestamp};

pub const DEFAULT_WINDOW_SECS: u64 = 60;
pub const DEFAULT_SKEW_SECS: u64 = 5;

/// The remote system's secrets.
#[derive(Clone, PartialEq, Eq)]
pub struct ServerSecrets {
    /// Known only to the server.
    pub x: Bits,
    /// Written into every card this server issues.
    pub y: Bits,
}

impl ServerSecrets {
    pub fn new(x: Bits, y: Bits) -> Self {
        ServerSecrets { x, y }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        ServerSecrets {
            x: Bits::from_bytes(rng.random()),
            y: Bits::from_bytes(rng.random()),
        }
    }
}

impl fmt::Debug for ServerSecrets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServerSecrets")
            .field("x", &"<redacted>")
            .field("y", &self.y)
            .finish()
    }
}

/// Personalization payload held by a user's card.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmartcardState {
    pub n_i: Bits,
    pub y: Bits,
    pub hash_id: HashId,
    pub k: usize,
}

/// The login message `(CID, N_i, C_i, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LoginRequest {
    pub cid: Bits,
    pub n_i: Bits,
    pub c_i: Bits,
    pub t: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuthReason {
    Ok,
    StaleTimestamp,
    FutureTimestamp,
    CheckFailed,
}

impl AuthReason {
    pub const fn as_str(self) -> &'static str {
        match self {
            AuthReason::Ok => "OK",
            AuthReason::StaleTimestamp => "STALE_TIMESTAMP",
            AuthReason::FutureTimestamp => "FUTURE_TIMESTAMP",
            AuthReason::CheckFailed => "CHECK_FAILED",
        }
    }
}

impl fmt::Display for AuthReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of the server's check. Acceptance is derived from the reason, so
/// an accepted decision always carries [`AuthReason::Ok`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthDecision {
    pub reason: AuthReason,
    /// The `h(PW)` the server unblinded from `CID`, present once the
    /// freshness check has passed.
    pub recovered_hpw: Option<Bits>,
}

impl AuthDecision {
    pub fn accepted(&self) -> bool {
        self.reason == AuthReason::Ok
    }

    pub(crate) fn rejected(reason: AuthReason) -> Self {
        AuthDecision {
            reason,
            recovered_hpw: None,
        }
    }
}

impl Serialize for AuthDecision {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("AuthDecision", 3)?;
        s.serialize_field("accepted", &self.accepted())?;
        s.serialize_field("reason", &self.reason)?;
        s.serialize_field("recovered_hpw", &self.recovered_hpw)?;
        s.end()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("freshness window must be at least one second")]
    ZeroWindow,
}

/// Freshness rules for step 1 of authentication.
///
/// A request stamped `t` and received at `t_star` passes iff
/// `t_star - t <= window_secs` and `t - t_star <= skew_secs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthPolicy {
    window_secs: u64,
    skew_secs: u64,
}

impl AuthPolicy {
    pub fn new(window_secs: u64, skew_secs: u64) -> Result<Self, PolicyError> {
        if window_secs == 0 {
            return Err(PolicyError::ZeroWindow);
        }
        Ok(AuthPolicy {
            window_secs,
            skew_secs,
        })
    }

    pub fn window_secs(&self) -> u64 {
        self.window_secs
    }

    pub fn skew_secs(&self) -> u64 {
        self.skew_secs
    }

    pub fn check_freshness(&self, t: Timestamp, t_star: Timestamp) -> Result<(), AuthReason> {
        let age = t_star.signed_diff(t);
        if age > i128::from(self.window_secs) {
            Err(AuthReason::StaleTimestamp)
        } else if -age > i128::from(self.skew_secs) {
            Err(AuthReason::FutureTimestamp)
        } else {
            Ok(())
        }
    }
}

impl Default for AuthPolicy {
    fn default() -> Self {
        AuthPolicy {
            window_secs: DEFAULT_WINDOW_SECS,
            skew_secs: DEFAULT_SKEW_SECS,
        }
    }
}

/// Computes `N_i = h(PW) ⊕ h(x)`.
pub fn register_user(pw: &Password, secrets: &ServerSecrets) -> Bits {
    hash_password(pw) ^ hash_bits(&secrets.x)
}

/// Personalizes a card with `[h(.), N_i, y]`. Returning it models delivery
/// over the secure channel.
pub fn issue_card(pw: &Password, secrets: &ServerSecrets, hash_id: HashId) -> SmartcardState {
    SmartcardState {
        n_i: register_user(pw, secrets),
        y: secrets.y,
        hash_id,
        k: hash_id.width_bits(),
    }
}

/// Every value the card derives while building a login request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoginTrace {
    pub hpw: Bits,
    pub cid: Bits,
    pub b_i: Bits,
    pub c_i: Bits,
}

pub fn login_trace(card: &SmartcardState, typed_pw: &Password, t: Timestamp) -> LoginTrace {
    let hpw = hash_password(typed_pw);
    let tb = embed_timestamp(t);
    let cid = hpw ^ hash_bits(&(card.n_i ^ card.y ^ tb));
    let b_i = hash_bits(&(cid ^ hpw));
    let c_i = hash_bits(&(tb ^ card.n_i ^ b_i ^ card.y));
    LoginTrace { hpw, cid, b_i, c_i }
}

/// Builds the login message. The typed password is not checked against
/// anything: the card holds no verifier for it.
pub fn make_login_request(
    card: &SmartcardState,
    typed_pw: &Password,
    t: Timestamp,
) -> LoginRequest {
    let trace = login_trace(card, typed_pw, t);
    LoginRequest {
        cid: trace.cid,
        n_i: card.n_i,
        c_i: trace.c_i,
        t,
    }
}

/// The values the server recomputes in steps 2 through 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerCheck {
    pub recovered_hpw: Bits,
    pub b_i: Bits,
    pub expected_c: Bits,
}

pub fn server_check(secrets: &ServerSecrets, req: &LoginRequest) -> ServerCheck {
    let tb = embed_timestamp(req.t);
    let recovered_hpw = req.cid ^ hash_bits(&(req.n_i ^ secrets.y ^ tb));
    let b_i = hash_bits(&(req.cid ^ recovered_hpw));
    let expected_c = hash_bits(&(tb ^ req.n_i ^ b_i ^ secrets.y));
    ServerCheck {
        recovered_hpw,
        b_i,
        expected_c,
    }
}

/// Runs the server's verification on a request received at `t_star`.
pub fn authenticate(
    secrets: &ServerSecrets,
    req: &LoginRequest,
    t_star: Timestamp,
    policy: &AuthPolicy,
) -> AuthDecision {
    if let Err(reason) = policy.check_freshness(req.t, t_star) {
        return AuthDecision::rejected(reason);
    }
    let check = server_check(secrets, req);
    let reason = if check.expected_c == req.c_i {
        AuthReason::Ok
    } else {
        AuthReason::CheckFailed
    };
    AuthDecision {
        reason,
        recovered_hpw: Some(check.recovered_hpw),
    }
}

/// Replaces `N_i` with `N_i ⊕ h(old) ⊕ h(new)`. The old password is not
/// verified first.
pub fn change_password(
    card: &SmartcardState,
    typed_old_pw: &Password,
    new_pw: &Password,
) -> SmartcardState {
    SmartcardState {
        n_i: card.n_i ^ hash_password(typed_old_pw) ^ hash_password(new_pw),
        ..card.clone()
    }
}

/// Anything that can rule on a login request received at a given time.
pub trait LoginVerifier: Send + Sync {
    fn verify(&self, req: &LoginRequest, t_star: Timestamp) -> AuthDecision;
}

/// The scheme's server: its secrets plus a freshness policy.
#[derive(Clone, Debug)]
pub struct Server {
    pub secrets: ServerSecrets,
    pub policy: AuthPolicy,
}

impl Server {
    pub fn new(secrets: ServerSecrets, policy: AuthPolicy) -> Self {
        Server { secrets, policy }
    }
}

impl LoginVerifier for Server {
    fn verify(&self, req: &LoginRequest, t_star: Timestamp) -> AuthDecision {
        authenticate(&self.secrets, req, t_star, &self.policy)
    }
}
