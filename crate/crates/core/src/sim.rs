//! Dense-matrix simulation of the probe experiment: Gibbs state, one
//! channel on the probe site, evolution under `H`, one Pauli readout.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{build_hamiltonian, LatticeSpec, ParamVector};
use crate::pauli::channel::single_qubit_matrix;
use crate::pauli::{Channel, Letter, PauliExpr, PauliString, Site};

pub const MAX_QUBITS: usize = 14;
const MAX_SHOTS: u64 = 1 << 50;

fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        Err(Error::TooManyQubits {
            qubits: n,
            max: MAX_QUBITS,
        })
    } else {
        Ok(())
    }
}

/// Qubit index of each site: lexicographic coordinate order, qubit 0 is the
/// leftmost Kronecker factor (most significant bit of the basis index).
pub fn site_index(lattice: &LatticeSpec) -> HashMap<Site, usize> {
    lattice.sites().into_iter().enumerate().map(|(i, s)| (s, i)).collect()
}

fn string_masks(p: &PauliString, index: &HashMap<Site, usize>, n: usize) -> Result<(usize, usize, u32)> {
    let (mut flip, mut sign, mut ys) = (0usize, 0usize, 0u32);
    for (site, letter) in p.letters() {
        let q = *index
            .get(site)
            .ok_or_else(|| Error::InvalidLattice(format!("site {site} outside the lattice")))?;
        let bit = 1usize << (n - 1 - q);
        match letter {
            Letter::X => flip |= bit,
            Letter::Y => {
                flip |= bit;
                sign |= bit;
                ys += 1;
            }
            Letter::Z => sign |= bit,
        }
    }
    Ok((flip, sign, ys))
}

/// Dense `2^n × 2^n` matrix of a Pauli expression on the lattice.
pub fn to_matrix(a: &PauliExpr<Complex64>, lattice: &LatticeSpec) -> Result<DMatrix<Complex64>> {
    let n = lattice.num_sites();
    check_qubits(n)?;
    let index = site_index(lattice);
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (p, c) in a.iter() {
        let (flip, sign, ys) = string_masks(p, &index, n)?;
        // P|x> = i^{#Y} (-1)^{|x ∧ sign|} |x ⊕ flip>
        let base = Complex64::new(1.0, 0.0) * Complex64::i().powu(ys) * c;
        for x in 0..dim {
            let v = if (x & sign).count_ones() % 2 == 1 { -base } else { base };
            m[(x ^ flip, x)] += v;
        }
    }
    Ok(m)
}

/// `2^n` operator acting as `u` on qubit `q` and identity elsewhere.
pub fn embed_single(u: &[[Complex64; 2]; 2], q: usize, n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let bit = 1usize << (n - 1 - q);
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for x in 0..dim {
        let b = usize::from(x & bit != 0);
        for r in 0..2 {
            let y = if r == 1 { x | bit } else { x & !bit };
            m[(y, x)] += u[r][b];
        }
    }
    m
}

fn hermitian_defect(h: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..h.nrows() {
        for c in r..h.ncols() {
            worst = worst.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Density matrix with its qubit count.
#[derive(Clone, Debug)]
pub struct DenseState {
    pub matrix: DMatrix<Complex64>,
    pub n: usize,
}

impl DenseState {
    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Hermitian to 1e-12, PSD to -1e-10, unit trace to 1e-10.
    pub fn validate(&self) -> Result<()> {
        let defect = hermitian_defect(&self.matrix);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        let min = self.matrix.clone().symmetric_eigenvalues().min();
        if min < -1e-10 {
            return Err(Error::InvalidExperiment(format!("state has eigenvalue {min}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidExperiment(format!("state trace {tr}")));
        }
        Ok(())
    }

    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (op * &self.matrix).trace()
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &DMatrix<Complex64>) -> DenseState {
        DenseState {
            matrix: u * &self.matrix * u.adjoint(),
            n: self.n,
        }
    }
}

/// `e^{-βH}/tr(e^{-βH})` via eigendecomposition with the spectrum shifted
/// by its minimum before exponentiating.
pub fn gibbs(h: &DMatrix<Complex64>, beta: f64) -> Result<DenseState> {
    let defect = hermitian_defect(h);
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidExperiment(format!("beta must be >= 0, got {beta}")));
    }
    let n = h.nrows().trailing_zeros() as usize;
    let eig = h.clone().symmetric_eigen();
    let w = boltzmann_weights(&eig.eigenvalues, beta);
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&w.map(|x| Complex64::new(x, 0.0)));
    Ok(DenseState {
        matrix: v * d * v.adjoint(),
        n,
    })
}

fn boltzmann_weights(e: &DVector<f64>, beta: f64) -> DVector<f64> {
    let shift = e.min();
    let w = e.map(|x| (-beta * (x - shift)).exp());
    let z = w.sum();
    w / z
}

/// `e^{-iHt}` from an eigendecomposition.
pub fn evolution_operator(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)));
    v * d * v.adjoint()
}

/// One thermalize / channel / evolve / measure experiment.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub beta: f64,
    pub channel: Channel,
    pub time: f64,
    pub observable: Letter,
    /// 0 returns the exact expectation.
    #[serde(default)]
    pub shots: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidExperiment(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !self.time.is_finite() {
            return Err(Error::InvalidExperiment("time must be finite".into()));
        }
        if self.shots > MAX_SHOTS {
            return Err(Error::InvalidExperiment(format!("shots {} above {MAX_SHOTS}", self.shots)));
        }
        Ok(())
    }
}

struct SignalKernel {
    k: DMatrix<Complex64>,
}

/// Eigendecomposed Hamiltonian with cached per-(β, channel, observable)
/// kernels, so each new time costs one `O(4^n)` contraction.
pub struct DenseSimulator {
    n: usize,
    probe_qubit: usize,
    energies: DVector<f64>,
    vectors: DMatrix<Complex64>,
    kernels: Mutex<HashMap<(u64, usize, Letter), Arc<SignalKernel>>>,
}

impl DenseSimulator {
    pub fn new(h: &DMatrix<Complex64>, lattice: &LatticeSpec) -> Result<Self> {
        let n = lattice.num_sites();
        check_qubits(n)?;
        if h.nrows() != 1 << n || h.ncols() != 1 << n {
            return Err(Error::InvalidExperiment(format!("matrix is {}x{}, lattice needs 2^{n}", h.nrows(), h.ncols())));
        }
        let defect = hermitian_defect(h);
        if defect > 1e-10 {
            return Err(Error::NotHermitian(defect));
        }
        let eig = h.clone().symmetric_eigen();
        let probe_qubit = site_index(lattice)[&lattice.probe()];
        Ok(DenseSimulator {
            n,
            probe_qubit,
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
            kernels: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_params(lattice: &LatticeSpec, lambda: &ParamVector) -> Result<Self> {
        let h = to_matrix(&build_hamiltonian(lattice, lambda), lattice)?;
        DenseSimulator::new(&h, lattice)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    fn kernel(&self, beta: f64, channel: Channel, mu: Letter) -> Arc<SignalKernel> {
        let key = (beta.to_bits(), channel.index(), mu);
        if let Some(k) = self.kernels.lock().expect("kernel cache").get(&key) {
            return k.clone();
        }
        let v = &self.vectors;
        let vh = v.adjoint();
        let w = boltzmann_weights(&self.energies, beta);
        let u = embed_single(&channel.unitary(), self.probe_qubit, self.n);
        let wu = &vh * u * v;
        let mut scaled = wu.clone();
        for (c, wc) in w.iter().enumerate() {
            scaled.column_mut(c).scale_mut(*wc);
        }
        let m = &scaled * wu.adjoint();
        let s = &vh * embed_single(&single_qubit_matrix(Some(mu)), self.probe_qubit, self.n) * v;
        // K_ab = S_ba M_ab
        let k = m.component_mul(&s.transpose());
        let k = Arc::new(SignalKernel { k });
        self.kernels.lock().expect("kernel cache").insert(key, k.clone());
        k
    }

    /// Exact `tr(σ^μ_0 e^{-iHt} C_B[ρ_β] e^{iHt})`.
    pub fn expectation(&self, beta: f64, channel: Channel, t: f64, mu: Letter) -> f64 {
        let k = self.kernel(beta, channel, mu);
        let phase = self.energies.map(|e| Complex64::from_polar(1.0, -e * t));
        let kp = &k.k * phase.map(|p| p.conj());
        phase.dot(&kp).re
    }

    /// Exact expectation, or the mean of `shots` ±1 outcomes.
    pub fn run(&self, spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
        spec.validate()?;
        let exact = self.expectation(spec.beta, spec.channel, spec.time, spec.observable);
        sample_mean(exact, spec.shots, rng)
    }
}

/// Mean of `shots` outcomes ±1 with `P(+1) = (1 + exact)/2`.
pub fn sample_mean(exact: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if shots == 0 {
        return Ok(exact);
    }
    let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let ups = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidExperiment(e.to_string()))?
        .sample(rng);
    Ok((2.0 * ups as f64 - shots as f64) / shots as f64)
}

/// One-off experiment from a dense Hamiltonian.
pub fn run_experiment(h: &DMatrix<Complex64>, lattice: &LatticeSpec, spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    DenseSimulator::new(h, lattice)?.run(spec, rng)
}

/// Black-box access to the probe signal.
pub trait ProbeInterface: Send + Sync {
    fn measure(&self, spec: &ExperimentSpec) -> Result<f64>;
    /// Number of `measure` calls so far.
    fn queries(&self) -> u64;
    /// Total shots spent (exact calls count as zero).
    fn shots_used(&self) -> u64;
    /// `Σ |t| · max(shots, 1)` over all calls.
    fn evolution_time(&self) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub spec: ExperimentSpec,
    pub estimate: f64,
}

#[derive(Default)]
struct Ledger {
    queries: u64,
    shots: u64,
    evolution_time: f64,
    log: Vec<ProbeRecord>,
}

impl Ledger {
    fn record(&mut self, spec: &ExperimentSpec, estimate: f64, keep: bool) {
        self.queries += 1;
        self.shots += spec.shots;
        self.evolution_time += spec.time.abs() * spec.shots.max(1) as f64;
        if keep {
            self.log.push(ProbeRecord { spec: *spec, estimate });
        }
    }
}

/// Probe backed by [`DenseSimulator`], with counters and an optional log.
pub struct SimulatedProbe {
    sim: DenseSimulator,
    rng: Mutex<ChaCha8Rng>,
    ledger: Mutex<Ledger>,
    keep_log: bool,
}

impl SimulatedProbe {
    pub fn new(sim: DenseSimulator, seed: u64) -> Self {
        SimulatedProbe {
            sim,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            ledger: Mutex::new(Ledger::default()),
            keep_log: true,
        }
    }

    pub fn from_params(lattice: &LatticeSpec, lambda: &ParamVector, seed: u64) -> Result<Self> {
        Ok(SimulatedProbe::new(DenseSimulator::from_params(lattice, lambda)?, seed))
    }

    /// Stop retaining per-call records (counters still update).
    pub fn without_log(mut self) -> Self {
        self.keep_log = false;
        self
    }

    pub fn simulator(&self) -> &DenseSimulator {
        &self.sim
    }

    pub fn log(&self) -> Vec<ProbeRecord> {
        self.ledger.lock().expect("probe ledger").log.clone()
    }
}

impl ProbeInterface for SimulatedProbe {
    fn measure(&self, spec: &ExperimentSpec) -> Result<f64> {
        spec.validate()?;
        let exact = self.sim.expectation(spec.beta, spec.channel, spec.time, spec.observable);
        let value = {
            let mut rng = self.rng.lock().expect("probe rng");
            sample_mean(exact, spec.shots, &mut rng)?
        };
        self.ledger.lock().expect("probe ledger").record(spec, value, self.keep_log);
        Ok(value)
    }

    fn queries(&self) -> u64 {
        self.ledger.lock().expect("probe ledger").queries
    }

    fn shots_used(&self) -> u64 {
        self.ledger.lock().expect("probe ledger").shots
    }

    fn evolution_time(&self) -> f64 {
        self.ledger.lock().expect("probe ledger").evolution_time
    }
}

/// Serves a recorded log back in order; a spec that differs from the
/// recording is an error.
pub struct ReplayProbe {
    records: Vec<ProbeRecord>,
    ledger: Mutex<Ledger>,
}

impl ReplayProbe {
    pub fn new(records: Vec<ProbeRecord>) -> Self {
        ReplayProbe {
            records,
            ledger: Mutex::new(Ledger::default()),
        }
    }
}

impl ProbeInterface for ReplayProbe {
    fn measure(&self, spec: &ExperimentSpec) -> Result<f64> {
        let mut ledger = self.ledger.lock().expect("replay ledger");
        let idx = ledger.queries as usize;
        let rec = self
            .records
            .get(idx)
            .ok_or_else(|| Error::InvalidExperiment(format!("replay log exhausted after {idx} calls")))?;
        if rec.spec != *spec {
            return Err(Error::InvalidExperiment(format!("call {idx} differs from the recorded experiment")));
        }
        ledger.record(spec, rec.estimate, false);
        Ok(rec.estimate)
    }

    fn queries(&self) -> u64 {
        self.ledger.lock().expect("replay ledger").queries
    }

    fn shots_used(&self) -> u64 {
        self.ledger.lock().expect("replay ledger").shots
    }

    fn evolution_time(&self) -> f64 {
        self.ledger.lock().expect("replay ledger").evolution_time
    }
}
