//! Probe registry: maps each selectable probe to the reports it emits.

use wignerlab::calculus::{
    fractional_sobolev_norm, lebesgue_norm, mixed_norm, quantum_sobolev_norm, schatten_norm, weighted_schatten_norm,
    weighted_sobolev_norm,
};
use wignerlab::config::ProbeKind;
use wignerlab::estimates::{
    b_remainder_report, c_init, commutator_report, convergence_report, diag_drift_report, gaussian_commutator_report,
    init_diff_report, initial_gap_report, positivity_defect_report, quantum_lambda_report, regularity_checklist,
    regularity_report, sqrt_comparison_report, weight_remainder_report, wick_square_report, wick_square_root_datum,
    wick_weyl_report, ProbeReport, SweepMember,
};
use wignerlab::quantize::weyl_quantize;
use wignerlab::{sample_field, Error, PhaseGrid, Result, SimConfig};

pub const REGULARITY_CASES: [(usize, f64, usize); 12] = [
    (1, 2.0, 1),
    (1, 2.5, 1),
    (1, 3.5, 1),
    (2, 2.0, 1),
    (2, 2.5, 1),
    (2, 3.5, 1),
    (1, 2.0, 2),
    (1, 2.5, 2),
    (1, 3.5, 2),
    (2, 2.0, 2),
    (2, 2.5, 2),
    (2, 3.5, 2),
];

pub struct Context<'a> {
    pub cfg: &'a SimConfig,
    pub grids: Vec<PhaseGrid>,
    pub members: Option<Vec<SweepMember>>,
}

impl Context<'_> {
    fn members(&self) -> Result<&[SweepMember]> {
        self.members.as_deref().ok_or_else(|| Error::Config("probe needs sweep members".into()))
    }

    fn c_inf(&self) -> Result<f64> {
        Ok(self.members()?.iter().map(|m| m.f_init.max_abs()).fold(0.0, f64::max))
    }
}

pub fn evaluate(kind: ProbeKind, ctx: &Context) -> Result<Vec<ProbeReport>> {
    let cfg = ctx.cfg;
    let profile = &cfg.initial;
    let grids = &ctx.grids;
    Ok(match kind {
        ProbeKind::Convergence => vec![convergence_report(ctx.members()?, 0.85, 1.15)?],
        ProbeKind::InitialGap => vec![initial_gap_report(ctx.members()?, 0.85, 1.15)?],
        ProbeKind::PositivityDefect => vec![positivity_defect_report(ctx.members()?, 0.8, 1.2)?],
        ProbeKind::DiagDrift => vec![diag_drift_report(ctx.members()?, 0.8, 1.2)?],
        ProbeKind::SqrtComparison => vec![sqrt_comparison_report(ctx.members()?, ctx.c_inf()?, cfg.n, cfg.eps)?],
        ProbeKind::QuantumLambda => {
            let mut out = Vec::new();
            for n in [cfg.n, 1.0] {
                let mut r = quantum_lambda_report(ctx.members()?, ctx.c_inf()?, n, cfg.eps)?;
                r.probe = format!("{} n={n}", r.probe);
                out.push(r);
                if cfg.n == 1.0 {
                    break;
                }
            }
            out
        }
        ProbeKind::BRemainder => vec![b_remainder_report(ctx.members()?, 1.8, 2.2)?],
        ProbeKind::Regularity => REGULARITY_CASES
            .iter()
            .map(|&case| regularity_report(ctx.members()?, profile, case, cfg.eps, 2.0, 0.05))
            .collect::<Result<_>>()?,
        ProbeKind::WickSquare => {
            [1.0, 2.0, f64::INFINITY].iter().map(|&p| wick_square_report(grids, profile, p)).collect::<Result<_>>()?
        }
        ProbeKind::InitDiff => vec![init_diff_report(grids, profile, 0.8, 1.2)?],
        ProbeKind::WickWeyl => vec![wick_weyl_report(grids, profile, 0.85, 1.15)?],
        ProbeKind::Commutator => vec![commutator_report(grids, cfg.pairs, cfg.seed, cfg.sign, 0.15)?],
        ProbeKind::WeightRemainder => vec![weight_remainder_report(grids, cfg.pairs, cfg.seed)?],
        ProbeKind::GaussianCommutator => [1.0, 2.0, f64::INFINITY]
            .iter()
            .map(|&p| gaussian_commutator_report(grids, cfg.pairs, 1.0, cfg.seed, p, 0.1))
            .collect::<Result<_>>()?,
        ProbeKind::Norms => Vec::new(),
    })
}

/// `(spec, value)` norm evaluations of the initial datum on the base grid.
pub fn norm_table(cfg: &SimConfig) -> Result<Vec<(String, f64)>> {
    let g = cfg.grid()?;
    let f = sample_field(&g, &cfg.initial)?;
    let root = f.sqrt_clamped();
    let (_, v0) = wick_square_root_datum(&f)?;
    let op_f = weyl_quantize(&f);
    let mut rows = vec![
        ("hbar".to_owned(), g.hbar()),
        ("L^1(f)".to_owned(), lebesgue_norm(&f, 1.0)),
        ("L^2(f)".to_owned(), lebesgue_norm(&f, 2.0)),
        ("L^inf(f)".to_owned(), lebesgue_norm(&f, f64::INFINITY)),
        ("L^3_x L^2_xi(d_xi sqrt f)".to_owned(), mixed_norm(&root.d_dxi(), 3.0, 2.0)),
        ("W^{1,2}(f)".to_owned(), weighted_sobolev_norm(&f, 1, 2.0, 0.0)),
        ("H^{1/2}(f)".to_owned(), fractional_sobolev_norm(&f, 0.5)),
        ("C_init(f)".to_owned(), c_init(&f)),
        ("S^1(op_f)".to_owned(), schatten_norm(&op_f, 1.0)),
        ("S^2(op_f)".to_owned(), schatten_norm(&op_f, 2.0)),
        ("S^inf(op_f)".to_owned(), schatten_norm(&op_f, f64::INFINITY)),
    ];
    for p in [3.0 - cfg.eps, 3.0 + cfg.eps] {
        rows.push((format!("S^{p}(<p>^{} v0)", cfg.n), weighted_schatten_norm(&v0, p, cfg.n)));
    }
    for k in [1, 2] {
        rows.push((format!("W^{{{k},2}}(v0)"), quantum_sobolev_norm(&v0, k, 2.0, 0.0)?));
    }
    for (name, v) in regularity_checklist(&f)? {
        rows.push((format!("checklist {name}"), v));
    }
    Ok(rows)
}
