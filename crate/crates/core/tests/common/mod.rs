#![allow(dead_code)]

//! Test-only fixtures: a straight-line reference for every protocol value,
//! and a verifying server used as a negative control.

use authlab_core::{
    authenticate, hash_password, AuthDecision, AuthPolicy, AuthReason, Bits, LoginRequest,
    LoginVerifier, Password, ServerSecrets, Timestamp,
};
use sha2::{Digest, Sha256};

pub type Block = [u8; 32];

/// Direct transcription of the registration, login, authentication and
/// password change formulas over raw byte arrays. Shares no code with the
/// library beyond the SHA-256 primitive.
pub mod oracle {
    use super::*;

    pub fn h(data: &[u8]) -> Block {
        Sha256::digest(data).into()
    }

    pub fn x(parts: &[&Block]) -> Block {
        let mut out = [0u8; 32];
        for p in parts {
            for i in 0..32 {
                out[i] ^= p[i];
            }
        }
        out
    }

    pub fn ts(t: u64) -> Block {
        let mut out = [0u8; 32];
        out[24..].copy_from_slice(&t.to_be_bytes());
        out
    }

    #[derive(Debug, PartialEq, Eq)]
    pub struct Values {
        pub n_i: Block,
        pub hpw: Block,
        pub cid: Block,
        pub b_i: Block,
        pub c_i: Block,
        pub recovered_hpw: Block,
        pub server_b_i: Block,
        pub server_c_i: Block,
        pub n_i_changed: Block,
    }

    /// `pw` registers, `typed` logs in at `t`, then the card changes from
    /// `typed` to `new_pw`.
    pub fn run(pw: &[u8], typed: &[u8], new_pw: &[u8], sx: &Block, sy: &Block, t: u64) -> Values {
        let n_i = x(&[&h(pw), &h(sx)]);

        let hpw = h(typed);
        let cid = x(&[&hpw, &h(&x(&[&n_i, sy, &ts(t)]))]);
        let b_i = h(&x(&[&cid, &hpw]));
        let c_i = h(&x(&[&ts(t), &n_i, &b_i, sy]));

        let recovered_hpw = x(&[&cid, &h(&x(&[&n_i, sy, &ts(t)]))]);
        let server_b_i = h(&x(&[&cid, &recovered_hpw]));
        let server_c_i = h(&x(&[&ts(t), &n_i, &server_b_i, sy]));

        let n_i_changed = x(&[&n_i, &h(typed), &h(new_pw)]);

        Values {
            n_i,
            hpw,
            cid,
            b_i,
            c_i,
            recovered_hpw,
            server_b_i,
            server_c_i,
            n_i_changed,
        }
    }
}

/// Values frozen from `tests/oracle/golden.py` (hashlib): password
/// `alice-pw`, x = h("server-x"), y = h("server-y"), t = 1_700_000_000.
pub mod golden {
    pub const PW: &[u8] = b"alice-pw";
    pub const T: u64 = 1_700_000_000;
    pub const X: &str = "5240bc7db80289b8e182ff0d5eace5ef4561b89376f7c12787d675b75244cd98";
    pub const Y: &str = "3ec76f7e1f2d3ee9a5056e6feb84c3d9f838e0815555a724d9912d5156e67e1d";
    pub const N_I: &str = "2ad4dc24df08e391cafe727133eac09afdab05e407ff8e3660d962c46becf4bd";
    pub const HPW: &str = "cefd4bcd86ca3d6d9d1064593870b4cd4fdb3fef0136b1c43684cb7f58a29036";
    pub const CID: &str = "171c7b96c42eeb9735243218a171550f55841429a2a502bd0c7391dda9cda38d";
    pub const B_I: &str = "616e711da0dc3a114bb7b8ff526e86fd5ab6b2e275d2d0930d17e9bd6328165e";
    pub const C_I: &str = "fddc8939161a8e19384fead46edea492fb062b11137f384c80166265757e7bdd";
    pub const FRAME: &str = concat!(
        "010100000068",
        "171c7b96c42eeb9735243218a171550f55841429a2a502bd0c7391dda9cda38d",
        "2ad4dc24df08e391cafe727133eac09afdab05e407ff8e3660d962c46becf4bd",
        "fddc8939161a8e19384fead46edea492fb062b11137f384c80166265757e7bdd",
        "000000006553f100",
    );
}

/// A server that additionally requires the recovered `h(PW)` to match a
/// stored one. Exists only to show the harness can tell the difference.
pub struct VerifyingServer {
    pub secrets: ServerSecrets,
    pub policy: AuthPolicy,
    pub stored_hpw: Bits,
}

impl VerifyingServer {
    pub fn new(secrets: ServerSecrets, registered_pw: &Password) -> Self {
        VerifyingServer {
            secrets,
            policy: AuthPolicy::default(),
            stored_hpw: hash_password(registered_pw),
        }
    }
}

impl LoginVerifier for VerifyingServer {
    fn verify(&self, req: &LoginRequest, t_star: Timestamp) -> AuthDecision {
        let d = authenticate(&self.secrets, req, t_star, &self.policy);
        if d.accepted() && d.recovered_hpw != Some(self.stored_hpw) {
            AuthDecision {
                reason: AuthReason::CheckFailed,
                recovered_hpw: d.recovered_hpw,
            }
        } else {
            d
        }
    }
}

pub fn bits(b: &Block) -> Bits {
    Bits::from_bytes(*b)
}
