//! Batch login trials with arbitrary passwords against an issued card.
//!
//! Two scenarios are supported: the legitimate card typed with random
//! passwords, and a duplicate of a victim's card typed with random passwords.
//! Trials draw passwords from a seeded ChaCha stream, so a report is a pure
//! function of `(card, verifier, seed, trials, clock)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{Bits, Password, Timestamp};
use crate::clock::Clock;
use crate::protocol::{
    make_login_request, AuthDecision, AuthPolicy, AuthReason, LoginVerifier, Server, ServerSecrets,
    SmartcardState,
};

/// Longest password the generator produces, in bytes.
pub const MAX_PASSWORD_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scenario {
    RandomPassword,
    ClonedCard,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::RandomPassword => "RANDOM_PASSWORD",
            Scenario::ClonedCard => "CLONED_CARD",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackTrial {
    pub trial_index: usize,
    pub password_used: Password,
    pub timestamp: Timestamp,
    pub accepted: bool,
    pub reason: AuthReason,
    pub recovered_hpw: Option<Bits>,
}

/// Aggregate counts for one attack run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttackReport {
    pub scenario: Scenario,
    pub trials: u64,
    pub accepted: u64,
    pub seed: u64,
}

impl AttackReport {
    /// Counts accepted trials. Order of `trials` does not matter.
    pub fn from_trials(scenario: Scenario, seed: u64, trials: &[AttackTrial]) -> Self {
        AttackReport {
            scenario,
            trials: trials.len() as u64,
            accepted: trials.iter().filter(|t| t.accepted).count() as u64,
            seed,
        }
    }

    /// `accepted / trials`. Exactly 1.0 when every trial was accepted.
    pub fn acceptance_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.accepted as f64 / self.trials as f64
        }
    }

    pub fn all_accepted(&self) -> bool {
        self.trials > 0 && self.accepted == self.trials
    }

    /// Single-line JSON with keys `scenario, trials, accepted, acceptance_rate, seed`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl Serialize for AttackReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("AttackReport", 5)?;
        s.serialize_field("scenario", &self.scenario)?;
        s.serialize_field("trials", &self.trials)?;
        s.serialize_field("accepted", &self.accepted)?;
        s.serialize_field("acceptance_rate", &self.acceptance_rate())?;
        s.serialize_field("seed", &self.seed)?;
        s.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackRun {
    pub report: AttackReport,
    pub trials: Vec<AttackTrial>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttackParams {
    pub trials: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl AttackParams {
    pub fn new(trials: usize, seed: u64) -> Self {
        AttackParams {
            trials,
            seed,
            parallel: true,
        }
    }

    pub fn sequential(self) -> Self {
        AttackParams {
            parallel: false,
            ..self
        }
    }
}

/// A bit-identical duplicate of `card`.
pub fn clone_card(card: &SmartcardState) -> SmartcardState {
    card.clone()
}

/// Uniform length in `0..=MAX_PASSWORD_LEN`, uniform bytes.
pub fn random_password<R: Rng + ?Sized>(rng: &mut R) -> Password {
    let len = rng.random_range(0..=MAX_PASSWORD_LEN);
    let mut bytes = vec![0u8; len];
    rng.fill(&mut bytes[..]);
    Password::new(bytes)
}

/// The password sequence used by a run with this seed.
pub fn draw_passwords(seed: u64, count: usize) -> Vec<Password> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_password(&mut rng)).collect()
}

fn run_trial<V, C>(
    verifier: &V,
    card: &SmartcardState,
    clock: &C,
    trial_index: usize,
    password: Password,
) -> AttackTrial
where
    V: LoginVerifier + ?Sized,
    C: Clock + ?Sized,
{
    let t = clock.now();
    let req = make_login_request(card, &password, t);
    let decision: AuthDecision = verifier.verify(&req, clock.now());
    AttackTrial {
        trial_index,
        password_used: password,
        timestamp: t,
        accepted: decision.accepted(),
        reason: decision.reason,
        recovered_hpw: decision.recovered_hpw,
    }
}

/// Runs `params.trials` logins on `card` with freshly drawn passwords against
/// an arbitrary verifier. Parallel and sequential execution give the same run.
pub fn run_attack<V, C>(
    verifier: &V,
    card: &SmartcardState,
    scenario: Scenario,
    params: AttackParams,
    clock: &C,
) -> Result<AttackRun, AttackError>
where
    V: LoginVerifier + ?Sized,
    C: Clock + ?Sized,
{
    if params.trials == 0 {
        return Err(AttackError::NoTrials);
    }
    let passwords = draw_passwords(params.seed, params.trials);
    let trials: Vec<AttackTrial> = if params.parallel {
        passwords
            .into_par_iter()
            .enumerate()
            .map(|(i, pw)| run_trial(verifier, card, clock, i, pw))
            .collect()
    } else {
        passwords
            .into_iter()
            .enumerate()
            .map(|(i, pw)| run_trial(verifier, card, clock, i, pw))
            .collect()
    };
    Ok(AttackRun {
        report: AttackReport::from_trials(scenario, params.seed, &trials),
        trials,
    })
}

/// Logs in with the legitimate card and random passwords.
pub fn run_random_password_attack<C: Clock + ?Sized>(
    card: &SmartcardState,
    secrets: &ServerSecrets,
    policy: AuthPolicy,
    params: AttackParams,
    clock: &C,
) -> Result<AttackRun, AttackError> {
    let server = Server::new(secrets.clone(), policy);
    run_attack(&server, card, Scenario::RandomPassword, params, clock)
}

/// Duplicates the victim's card, then logs in with the duplicate and random
/// passwords. The victim's card is only read.
pub fn run_cloned_card_attack<C: Clock + ?Sized>(
    victim_card: &SmartcardState,
    secrets: &ServerSecrets,
    policy: AuthPolicy,
    params: AttackParams,
    clock: &C,
) -> Result<AttackRun, AttackError> {
    let duplicate = clone_card(victim_card);
    let server = Server::new(secrets.clone(), policy);
    run_attack(&server, &duplicate, Scenario::ClonedCard, params, clock)
}
