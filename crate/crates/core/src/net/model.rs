//! The unfolded network: PUM blocks, APB, recovery multipliers.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blocks::{Apb, ApbCache, PumBlock, SubNetCache};
use super::loss::{constraint_term, lagrangian_gradient, regularizer, violation_penalty, LossBreakdown};
use super::param::Param;
use super::recover::{recover_precoder, recovery_directions, Multipliers};
use super::tensor::TensorBuffer;
use crate::error::{Result, SlpError};
use crate::model::SlpInstance;
use crate::prox::{objective_grad_step, ProxDirection};
use crate::solvers::{deficit_gradient, prox_sweep, SlpKind, SweepOutcome};

/// Per-sample training objective added to ‖w‖².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainingLoss {
    /// Multiplier-weighted constraint terms with the learned recovery multipliers.
    Lagrangian,
    /// ρ·Σ max(0, violation)² on the network output.
    #[default]
    Penalty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub kind: SlpKind,
    pub n_antennas: usize,
    pub n_users: usize,
    /// Number of PUM blocks B_r.
    pub blocks: usize,
    pub pum_channels: usize,
    pub apb_channels: usize,
    /// Weight ρ of the violation penalties (skipped prox steps and, for [`TrainingLoss::Penalty`], the output).
    pub hinge_weight: f64,
    pub loss: TrainingLoss,
    /// Initial γ and μ emitted by untrained sub-networks.
    pub gamma_init: f64,
    pub mu_init: f64,
    pub seed: u64,
}

impl NetConfig {
    pub fn new(kind: SlpKind, n_antennas: usize, n_users: usize) -> Self {
        Self {
            kind,
            n_antennas,
            n_users,
            blocks: 2,
            pum_channels: 20,
            apb_channels: 64,
            hinge_weight: 10.0,
            loss: TrainingLoss::Penalty,
            gamma_init: 0.1,
            mu_init: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("n_antennas", self.n_antennas),
            ("n_users", self.n_users),
            ("blocks", self.blocks),
            ("pum_channels", self.pum_channels),
            ("apb_channels", self.apb_channels),
        ] {
            if v == 0 {
                return Err(SlpError::ZeroDimension { what });
            }
        }
        for (name, v) in [("gamma_init", self.gamma_init), ("mu_init", self.mu_init)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SlpError::InvalidParameter { name, value: v });
            }
        }
        if !(self.hinge_weight >= 0.0) {
            return Err(SlpError::InvalidParameter { name: "hinge_weight", value: self.hinge_weight });
        }
        Ok(())
    }

    /// Input grid (2N_t, K).
    pub fn grid(&self) -> (usize, usize) {
        (2 * self.n_antennas, self.n_users)
    }
}

/// How far a forward pass runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    /// The first r PUM blocks, without the APB.
    Blocks(usize),
    Full,
}

#[derive(Debug, Clone)]
pub struct SlpDnet {
    pub config: NetConfig,
    pub blocks: Vec<PumBlock>,
    pub apb: Apb,
    /// Base recovery multipliers: (μ1, μ2) or (μ, λ), one entry per user.
    pub multipliers: [Param; 2],
}

#[derive(Debug, Clone)]
struct BlockPass {
    caches: [SubNetCache; 3],
    mu: Vec<f64>,
    gamma: Vec<f64>,
    lambda: Vec<f64>,
    w_in: Vec<DVector<f64>>,
    outcomes: Vec<Vec<SweepOutcome>>,
}

#[derive(Debug, Clone)]
struct ApbPass {
    cache: ApbCache,
}

/// Intermediate values of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub w: Vec<DVector<f64>>,
    pub w0: Vec<DVector<f64>>,
    /// Per-sample scale c̄; the network runs on the instance with margins c_i/c̄.
    pub scale: Vec<f64>,
    unit: Vec<SlpInstance>,
    w_unit: Vec<DVector<f64>>,
    /// Batch-mean hinge penalty over all evaluated blocks.
    pub hinge: f64,
    w_pum: Vec<DVector<f64>>,
    blocks: Vec<BlockPass>,
    apb: Option<ApbPass>,
}

impl ForwardPass {
    /// (μ, γ, λ) emitted by block r for each sample, λ including the skip input.
    pub fn block_outputs(&self, r: usize) -> Vec<(f64, f64, f64)> {
        let b = &self.blocks[r];
        (0..b.mu.len()).map(|s| (b.mu[s], b.gamma[s], b.lambda[s])).collect()
    }

    /// Output of the last evaluated PUM block, at unit scale.
    pub fn pum_output(&self) -> &[DVector<f64>] {
        &self.w_pum
    }

    /// Unit-scale instances the network was evaluated on.
    pub fn unit_instances(&self) -> &[SlpInstance] {
        &self.unit
    }

    /// Network output at unit scale, `w[s] / scale[s]`.
    pub fn unit_output(&self) -> &[DVector<f64>] {
        &self.w_unit
    }

    /// Number of (sample, block, user) prox steps that were skipped.
    pub fn skipped_count(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| b.outcomes.iter().flatten())
            .filter(|o| matches!(o, SweepOutcome::Skipped { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }
}

/// The instance with every margin divided by c̄ = √(mean_i Γ_i v0), and c̄.
///
/// Power minimization is homogeneous in the margins, so w*(inst) = c̄·w*(unit).
pub fn unit_instance(inst: &SlpInstance) -> (SlpInstance, f64) {
    let k = inst.n_users();
    let mean = inst.targets.iter().map(|g| g * inst.noise).sum::<f64>() / k as f64;
    let unit = SlpInstance {
        channels: inst.channels.clone(),
        targets: inst.targets.iter().map(|g| g * inst.noise / mean).collect(),
        noise: 1.0,
        modulation: inst.modulation,
        error_bounds: inst.error_bounds.clone(),
    };
    (unit, mean.sqrt())
}

/// Per-user projector onto span{Λ_k, ΠᵀΛ_k} applied to w.
fn user_projection(inst: &SlpInstance, k: usize, w: &DVector<f64>) -> DVector<f64> {
    let lam = &inst.channels[k];
    let n2 = lam.norm_squared();
    if n2 == 0.0 {
        return DVector::zeros(w.len());
    }
    let d = inst.quadrature(k);
    (lam * lam.dot(w) + &d * d.dot(w)) / n2
}

impl SlpDnet {
    pub fn new(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let grid = config.grid();
        let blocks = (0..config.blocks)
            .map(|r| {
                let mut b = PumBlock::new(&format!("pum{r}"), config.pum_channels, grid, &mut rng);
                b.mu.set_output_offset(config.mu_init);
                b.gamma.set_output_offset(config.gamma_init);
                b
            })
            .collect();
        let apb = Apb::new(config.apb_channels, 2 * config.n_antennas * config.n_users, &mut rng);
        let k = config.n_users;
        let mut draw = |name: &str| {
            let v = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            Param::new(name, vec![k], v, false)
        };
        let multipliers = [draw("multipliers.first"), draw("multipliers.second")];
        Ok(Self { config, blocks, apb, multipliers })
    }

    /// Number of conv and FC layers L in the regularizer.
    pub fn layer_count(&self) -> usize {
        self.blocks.len() * PumBlock::LAYERS + Apb::LAYERS
    }

    pub fn base_multipliers(&self) -> Multipliers {
        Multipliers {
            first: self.multipliers[0].value.clone(),
            second: self.multipliers[1].value.clone(),
        }
    }

    /// Multipliers used in the closed-form start, in units of the instance margins.
    pub fn recovery_multipliers(&self, inst: &SlpInstance) -> Multipliers {
        self.base_multipliers().scaled(&self.recovery_scale(inst))
    }

    /// Multipliers weighting the loss constraint terms.
    pub fn loss_multipliers(&self, inst: &SlpInstance) -> Multipliers {
        self.base_multipliers().scaled(&self.loss_scale(inst))
    }

    fn recovery_scale(&self, inst: &SlpInstance) -> Vec<f64> {
        (0..inst.n_users()).map(|i| inst.margin(i)).collect()
    }

    fn loss_scale(&self, inst: &SlpInstance) -> Vec<f64> {
        match self.config.kind {
            SlpKind::Robust => vec![1.0; inst.n_users()],
            _ => self.recovery_scale(inst),
        }
    }

    fn recovery_kind(&self) -> SlpKind {
        match self.config.kind {
            SlpKind::Robust => SlpKind::Relaxed,
            k => k,
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.blocks.iter().flat_map(|b| b.params()).collect();
        v.extend(self.apb.params());
        v.extend(self.multipliers.iter());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = self.blocks.iter_mut().flat_map(|b| b.params_mut()).collect();
        v.extend(self.apb.params_mut());
        v.extend(self.multipliers.iter_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Clamps multipliers that must stay nonnegative.
    pub fn project_multipliers(&mut self) {
        let kind = self.config.kind;
        for (j, p) in self.multipliers.iter_mut().enumerate() {
            if j == 0 || kind != SlpKind::Strict {
                p.value.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    fn check_batch(&self, batch: &[SlpInstance]) -> Result<()> {
        if batch.is_empty() {
            return Err(SlpError::ZeroDimension { what: "batch" });
        }
        for inst in batch {
            if inst.n_users() != self.config.n_users {
                return Err(SlpError::DimensionMismatch {
                    context: "users per instance",
                    expected: self.config.n_users,
                    found: inst.n_users(),
                });
            }
            if inst.n_antennas() != self.config.n_antennas {
                return Err(SlpError::DimensionMismatch {
                    context: "antennas per instance",
                    expected: self.config.n_antennas,
                    found: inst.n_antennas(),
                });
            }
        }
        Ok(())
    }

    /// Margin-normalized channels as a (B, 1, 2N_t, K) tensor.
    pub fn channel_features(&self, batch: &[SlpInstance]) -> Result<TensorBuffer> {
        let (rows, k) = self.config.grid();
        let mut v = vec![0.0; batch.len() * rows * k];
        for (s, inst) in batch.iter().enumerate() {
            for u in 0..k {
                let c = inst.margin(u);
                for r in 0..rows {
                    v[(s * rows + r) * k + u] = inst.channels[u][r] / c;
                }
            }
        }
        TensorBuffer::new(vec![batch.len(), 1, rows, k], v)
    }

    fn precoder_features(&self, batch: &[SlpInstance], w: &[DVector<f64>]) -> Result<TensorBuffer> {
        let (rows, k) = self.config.grid();
        let mut v = vec![0.0; batch.len() * rows * k];
        for (s, (inst, w)) in batch.iter().zip(w).enumerate() {
            for u in 0..k {
                let p = user_projection(inst, u, w);
                for r in 0..rows {
                    v[(s * rows + r) * k + u] = p[r];
                }
            }
        }
        TensorBuffer::new(vec![batch.len(), 1, rows, k], v)
    }

    pub fn forward(&mut self, batch: &[SlpInstance], depth: Depth, training: bool) -> Result<ForwardPass> {
        self.check_batch(batch)?;
        let (unit, scale): (Vec<SlpInstance>, Vec<f64>) = batch.iter().map(unit_instance).unzip();
        let batch = &unit[..];
        let kind = self.config.kind;
        let n = batch.len();
        let x = self.channel_features(batch)?;
        let mut w = Vec::with_capacity(n);
        for inst in batch {
            w.push(recover_precoder(self.recovery_kind(), &self.recovery_multipliers(inst), inst)?.w1);
        }
        let w0 = w.clone();
        let n_blocks = match depth {
            Depth::Blocks(r) => r.min(self.blocks.len()),
            Depth::Full => self.blocks.len(),
        };
        let mut hinge = 0.0;
        let mut passes = Vec::with_capacity(n_blocks);
        let mut prev_lambda = vec![0.0; n];
        for r in 0..n_blocks {
            let wrap = |e| SlpError::Block { block: r, source: Box::new(e) };
            let block = &self.blocks[r];
            let (mu, c_mu) = block.mu.forward(&x).map_err(wrap)?;
            let (gamma, c_gamma) = block.gamma.forward(&x).map_err(wrap)?;
            let (raw, c_lambda) = block.lambda.forward(&x).map_err(wrap)?;
            let lambda: Vec<f64> = raw.iter().zip(&prev_lambda).map(|(a, b)| a + b).collect();
            let mut outcomes = Vec::with_capacity(n);
            let mut next = Vec::with_capacity(n);
            for (s, inst) in batch.iter().enumerate() {
                let v = objective_grad_step(&w[s], gamma[s], lambda[s]);
                let (wn, out) =
                    prox_sweep(kind, inst, &v, gamma[s], mu[s], ProxDirection::Quadrature).map_err(wrap)?;
                for (i, o) in out.iter().enumerate() {
                    if let SweepOutcome::Skipped { violation, .. } = o {
                        hinge += self.config.hinge_weight * inst.margin(i) * violation / n as f64;
                    }
                }
                outcomes.push(out);
                next.push(wn);
            }
            let w_in = std::mem::replace(&mut w, next);
            prev_lambda.clone_from(&lambda);
            passes.push(BlockPass { caches: [c_mu, c_gamma, c_lambda], mu, gamma, lambda, w_in, outcomes });
        }
        let w_pum = w.clone();
        let apb = if depth == Depth::Full {
            let f = self.precoder_features(batch, &w)?;
            let (m, cache) = self.apb.forward(&f, training)?;
            let (rows, k) = self.config.grid();
            let mv = m.values();
            for (s, ws) in w.iter_mut().enumerate() {
                for r in 0..rows {
                    ws[r] += (0..k).map(|u| mv[(s * rows + r) * k + u]).sum::<f64>();
                }
            }
            Some(ApbPass { cache })
        } else {
            None
        };
        if w.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(SlpError::NonFinite { what: "network output", batch: 0 });
        }
        let up = |v: &[DVector<f64>]| v.iter().zip(&scale).map(|(w, c)| w * *c).collect::<Vec<_>>();
        Ok(ForwardPass { w: up(&w), w0: up(&w0), scale, unit, w_unit: w, hinge, w_pum, blocks: passes, apb })
    }

    /// Accumulates parameter gradients given dLoss/dw at unit scale for every sample.
    ///
    /// The hinge contribution is added here with its batch-mean weighting.
    pub fn backward(&mut self, pass: &ForwardPass, grad_w: &[DVector<f64>]) -> Result<()> {
        let batch = &pass.unit[..];
        let kind = self.config.kind;
        let n = batch.len();
        let (rows, k) = self.config.grid();
        let mut g: Vec<DVector<f64>> = grad_w.to_vec();
        if let Some(apb) = &pass.apb {
            let mut gm = vec![0.0; n * rows * k];
            for (s, gs) in g.iter().enumerate() {
                for r in 0..rows {
                    for u in 0..k {
                        gm[(s * rows + r) * k + u] = gs[r];
                    }
                }
            }
            let gm = TensorBuffer::new(vec![n, 1, rows, k], gm)?;
            let gf = self.apb.backward(&apb.cache, &gm)?;
            let gv = gf.values();
            for (s, (gs, inst)) in g.iter_mut().zip(batch).enumerate() {
                for u in 0..k {
                    let col = DVector::from_iterator(rows, (0..rows).map(|r| gv[(s * rows + r) * k + u]));
                    *gs += user_projection(inst, u, &col);
                }
            }
        }
        let mut g_lambda_skip = vec![0.0; n];
        for r in (0..pass.blocks.len()).rev() {
            let bp = &pass.blocks[r];
            let mut g_mu = vec![0.0; n];
            let mut g_gamma = vec![0.0; n];
            let mut g_lambda = g_lambda_skip.clone();
            for (s, inst) in batch.iter().enumerate() {
                let mut gs = g[s].clone();
                for (i, o) in bp.outcomes[s].iter().enumerate().rev() {
                    match o {
                        SweepOutcome::Applied(e) => {
                            g_mu[s] += e.d_mu.dot(&gs);
                            g_gamma[s] += e.d_gamma.dot(&gs);
                            let j = o.total_jacobian(kind, inst, i).expect("applied step");
                            gs = j.tr_mul(&gs);
                        }
                        SweepOutcome::Skipped { violation, input } => {
                            if *violation > 0.0 {
                                let coef = self.config.hinge_weight * inst.margin(i) / n as f64;
                                gs += deficit_gradient(kind, inst, i, input) * coef;
                            }
                        }
                    }
                }
                let (gamma, lambda) = (bp.gamma[s], bp.lambda[s]);
                let w_in = &bp.w_in[s];
                g_gamma[s] += gs.iter().zip(w_in.iter()).map(|(a, w)| a * (-2.0 * w - lambda)).sum::<f64>();
                g_lambda[s] += -gamma * gs.sum();
                g[s] = gs * (1.0 - 2.0 * gamma);
            }
            let block = &mut self.blocks[r];
            let wrap = |e| SlpError::Block { block: r, source: Box::new(e) };
            block.mu.backward(&bp.caches[0], &g_mu).map_err(wrap)?;
            block.gamma.backward(&bp.caches[1], &g_gamma).map_err(wrap)?;
            block.lambda.backward(&bp.caches[2], &g_lambda).map_err(wrap)?;
            g_lambda_skip = g_lambda;
        }
        let rk = self.recovery_kind();
        for (inst, gs) in batch.iter().zip(&g) {
            let scale = self.recovery_scale(inst);
            for i in 0..k {
                let (d1, d2) = recovery_directions(rk, inst, i);
                self.multipliers[0].grad[i] += scale[i] * d1.dot(gs);
                self.multipliers[1].grad[i] += scale[i] * d2.dot(gs);
            }
        }
        Ok(())
    }

    /// Forward pass, loss and full gradient accumulation (gradients are zeroed first).
    pub fn loss_and_gradients(
        &mut self,
        batch: &[SlpInstance],
        depth: Depth,
        vartheta: f64,
        training: bool,
    ) -> Result<(LossBreakdown, ForwardPass)> {
        self.zero_grad();
        let pass = self.forward(batch, depth, training)?;
        let kind = self.config.kind;
        let rho = self.config.hinge_weight;
        let n = batch.len() as f64;
        let mut loss = LossBreakdown { hinge: pass.hinge, ..Default::default() };
        let mut grads = Vec::with_capacity(batch.len());
        let mut gm = [vec![0.0; self.config.n_users], vec![0.0; self.config.n_users]];
        for (inst, w) in pass.unit.iter().zip(&pass.w_unit) {
            loss.objective += w.norm_squared() / n;
            match self.config.loss {
                TrainingLoss::Lagrangian => {
                    let m = self.loss_multipliers(inst);
                    loss.constraint += constraint_term(kind, inst, w, &m) / n;
                    let (g, g1, g2) = lagrangian_gradient(kind, inst, w, &m);
                    let scale = self.loss_scale(inst);
                    for i in 0..self.config.n_users {
                        gm[0][i] += scale[i] * g1[i] / n;
                        gm[1][i] += scale[i] * g2[i] / n;
                    }
                    grads.push(g / n);
                }
                TrainingLoss::Penalty => {
                    let (p, g) = violation_penalty(kind, inst, w);
                    loss.constraint += rho * p / n;
                    grads.push((w * 2.0 + g * rho) / n);
                }
            }
        }
        let layers = self.layer_count();
        loss.regularizer = regularizer(&self.params(), layers, vartheta);
        let loss = loss.finish();
        self.backward(&pass, &grads)?;
        for (p, g) in self.multipliers.iter_mut().zip(&gm) {
            for (a, b) in p.grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        if vartheta > 0.0 {
            let c = 2.0 * vartheta / layers as f64;
            for p in self.params_mut() {
                if p.regularized {
                    for (g, v) in p.grad.iter_mut().zip(&p.value) {
                        *g += c * v;
                    }
                }
            }
        }
        Ok((loss, pass))
    }
}
