//! Verification checks, grouped by suite. Every check runs under
//! [`guarded`], so an error or panic becomes a failing record and later
//! checks still run.

pub mod aps;
pub mod contraction;
pub mod flow;
pub mod norms;
pub mod orbits;

use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::report::{Record, Recorder};

pub mod anchor {
    pub const PARSEVAL: &str = "‖γ‖²_{L²} = Σ|c_n|² = ∫|γ|² dθ/2π";
    pub const PROJECTIONS: &str = "Π±Π± = Π±, Π⁺ + Π⁻ = id, Π⁺Π⁻ = 0";
    pub const NORM_MONOTONE: &str = "‖Π±γ‖_{L²_{1/2}} ≤ ‖γ‖_{L²_{1/2}}";
    pub const ROUNDTRIP: &str = "synthesize(sample(γ, M), N) = γ for M ≥ 2N+2";
    pub const INNER: &str = "⟨γ,γ⟩_s = ‖γ‖²_s";
    pub const GRAD_H: &str = "∇H(x) = 2h′(|x|²)x, X_H = J∇H";
    pub const FLAT: &str = "H = 0 on |x|² ≤ s0, X_H(x) = 2(1+ε)i·x on |x|² ≥ s1";
    pub const SPLITTING: &str = "X_H(u) = c·u + X_{H_c}(u)";
    pub const COMPACT_LIPSCHITZ: &str = "‖X_{H_c}(u₁) − X_{H_c}(u₂)‖_{L²} ≤ C‖u₁ − u₂‖_{L²}";
    pub const K_FACTOR: &str = "X_H(x) = K(x)·x, |K(x)x − K(y)y| ≤ 2C(|x|+|y|)|x−y|";
    pub const LEVELS: &str = "2h′(s) = k has one root in (s0, s1) for 0 < k < 2(1+ε)";
    pub const ACTION: &str = "CSD_H(γ) = ½Σ n|c_n|² − ∫H(γ) dθ/2π";
    pub const GRADIENT: &str = "⟨∇CSD_H(γ), δ⟩_{L²} = d/ds CSD_H(γ + sδ)";
    pub const NORM_EQUIVALENCE: &str = "m‖u‖²_{L²_1} ≤ E(u) ≤ M‖u‖²_{L²_1} iff c ∉ i·ℤ";
    pub const APS_DEFECT: &str = "λ(1−e^{−ελ})² ≤ λ(1−e^{−2ελ})";
    pub const Q_ENERGY: &str = "2∫|∂_t Q_ε(φ_λ)|² = λ(1−e^{−2ελ})";
    pub const RIGHT_INVERSE: &str = "D_ε P_ε g = g, (Π⁺_L P_ε g)(0) = 0, (Π⁻_L P_ε g)(ε) = 0";
    pub const APS_Q: &str = "aps_boundary(Q_ε β) = β";
    pub const UNIFORM: &str = "‖P_ε‖, ‖Q_ε‖, ‖P_ε(a)|_∂‖_{L²_{1/2}} ≤ C with C independent of ε";
    pub const SOBOLEV_L4: &str = "∫|f|⁴ ≤ ε(∫|∇f|²)²";
    pub const MIXED_L4: &str = "‖Q_ε(β)+P_ε(v)‖_{L⁴} ≤ C‖β‖_{L²_{1/2}} + C‖v‖_{L²}";
    pub const L4_SMALL: &str = "‖Q_ε(β)‖_{L⁴} → 0 as ε → 0";
    pub const NONLINEAR_LIPSCHITZ: &str = "‖X_H(α)−X_H(β)‖_{L²} ≤ 2C(‖α‖_{L⁴}+‖β‖_{L⁴})‖α−β‖_{L⁴}";
    pub const CYLINDER_ENERGY: &str = "E(u) = ½∫∫|u_t|² + |u_θ − X_H(u)|², E = 0 on orbit cylinders";
    pub const CONTRACTION: &str = "v = g − ∇H(Q_ε(β) + P_ε(v)), ‖v‖_{L²} ≤ 1/8C";
    pub const H_EPS: &str = "H^ε(β, 0) → 0 as ε → 0";
    pub const UNIQUENESS: &str = "unique fixed point in the 1/8C ball";
    pub const GRID_CONVERGENCE: &str = "u_{M} − u_{2M} = O(M^{−p}), p ≥ 2";
    pub const ENERGY_IDENTITY: &str = "CSD_H(u(T,·)) − CSD_H(u(0,·)) = E(u)";
    pub const LINEAR_FLOW: &str = "ΔCSD_H = (n/2)α²(e^{2nT}−1)";
    pub const SEMIGROUP: &str = "Φ_δ∘Φ_δ = Φ_{2δ} where H ≡ 0";
    pub const STATIONARY: &str = "∂_t γ = ∇CSD_H(γ) = 0 on orbits";
    pub const PUSHFORWARD: &str = "CSD_H(GF_t(γ)) ≥ CSD_H(γ)";
    pub const CRITICAL: &str = "∇CSD_H(x) = 0, CSD_H(x) ≥ β";
    pub const ORACLE: &str = "γ = √s e^{ikθ}e₁ with 2h′(s) = k, CSD_H = ½ks − h(s)";
    pub const BETA: &str = "CSD_H|Γ_α ≥ β > 0";
    pub const SIGMA_BOUNDARY: &str = "CSD_H|∂Σ_τ ≤ 0";
    pub const INTERSECTION: &str = "Σ_τ ∩ Γ_α = {αe⁺}, full-rank difference map";
    pub const CYCLES: &str = "Γ_α = {γ ∈ T⁺: ‖γ‖_{L²_{1/2}} = α}, Σ_τ = {γ⁻ + se⁺: ‖γ⁻‖ ≤ τ, 0 ≤ s ≤ τ}";
    pub const RHO: &str = "ρ = 1 on [−1,1], ρ(x) = 1/x² for |x| ≥ 2";
    pub const PERTURBATION: &str = "F(x,v) = σ(x) + ρ(‖σ(x)‖²_{L²_{1/2}})v, |CSD_H(F) − CSD_H(σ)| ≤ B";
    pub const COVERAGE: &str = "run_suite all exercises every operation";
}

/// Runs `check`; an `Err` or a panic is recorded as a failing record `name`.
pub fn guarded<F>(rec: &mut Recorder, name: &str, anchor: &str, criterion: Option<u8>, check: F)
where
    F: FnOnce(&mut Recorder) -> actionlab::Result<()>,
{
    let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut *rec)));
    let error = match outcome {
        Ok(Ok(())) => return,
        Ok(Err(e)) => e.to_string(),
        Err(panic) => panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()),
    };
    let mut record = Record::failed(name, anchor, error);
    record.criterion = criterion;
    rec.push(record);
}

/// `|a − b| / max(|b|, floor)`.
pub(crate) fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
