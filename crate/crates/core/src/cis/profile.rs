use crate::error::{Error, Result};

/// Position of one Stiefel factor inside the flattened CIS parameterization.
///
/// Canonical order: comb isometries by slot, then instruments by slot and
/// index, then state purifications.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorId {
    Comb(usize),
    Instrument { slot: usize, index: usize },
    State(usize),
}

/// Every dimension that fixes the shape of a CIS parameterization.
///
/// Slot `t` maps system input `i_t` (dimension `d_in[t]`) plus comb ancilla
/// `a_t` to system output `o_t` plus ancilla `a_{t+1}`; the instrument at slot
/// `t` then maps `o_t` to `i_{t+1}`. Hence `d_in` and `d_anc` carry `N + 1`
/// entries, the last ones describing the output of the final instrument and
/// the final (traced) ancilla.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionProfile {
    d_in: Vec<usize>,
    d_out: Vec<usize>,
    d_anc: Vec<usize>,
    d_env: Vec<Vec<Vec<usize>>>,
    d_ref: Vec<usize>,
}

impl DimensionProfile {
    pub fn new(
        d_in: Vec<usize>,
        d_out: Vec<usize>,
        d_anc: Vec<usize>,
        d_env: Vec<Vec<Vec<usize>>>,
        d_ref: Vec<usize>,
    ) -> Result<Self> {
        let profile = Self { d_in, d_out, d_anc, d_env, d_ref };
        profile.validate()?;
        Ok(profile)
    }

    /// Profile with the same system dimension `d` on every wire, `n_instruments`
    /// instruments per slot each with `branches` outcomes of environment
    /// dimension `env_dim`, and `n_states` states with reference dimension
    /// `ref_dim`. `ancillas` lists `d_a[0..=N]`.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        slots: usize,
        d: usize,
        ancillas: &[usize],
        n_instruments: usize,
        branches: usize,
        env_dim: usize,
        n_states: usize,
        ref_dim: usize,
    ) -> Result<Self> {
        if ancillas.len() != slots + 1 {
            return Err(Error::Profile(format!("{slots} slots need {} ancilla dimensions, got {}", slots + 1, ancillas.len())));
        }
        Self::new(
            vec![d; slots + 1],
            vec![d; slots],
            ancillas.to_vec(),
            vec![vec![vec![env_dim; branches]; n_instruments]; slots],
            vec![ref_dim; n_states],
        )
    }

    fn validate(&self) -> Result<()> {
        let n = self.d_out.len();
        if n == 0 {
            return Err(Error::Profile("at least one slot is required".into()));
        }
        if self.d_in.len() != n + 1 || self.d_anc.len() != n + 1 || self.d_env.len() != n {
            return Err(Error::Profile(format!(
                "inconsistent slot counts: d_in {}, d_out {}, d_anc {}, instruments {}",
                self.d_in.len(),
                n,
                self.d_anc.len(),
                self.d_env.len()
            )));
        }
        let all_dims = self
            .d_in
            .iter()
            .chain(&self.d_out)
            .chain(&self.d_anc)
            .chain(&self.d_ref)
            .chain(self.d_env.iter().flatten().flatten());
        if all_dims.clone().any(|&d| d == 0) {
            return Err(Error::Profile("all dimensions must be at least 1".into()));
        }
        if self.d_anc[0] != 1 {
            return Err(Error::Profile(format!("initial ancilla must be trivial, got dimension {}", self.d_anc[0])));
        }
        if self.d_ref.is_empty() {
            return Err(Error::Profile("at least one state is required".into()));
        }
        for t in 0..n {
            let (rows, cols) = self.comb_shape(t);
            if rows < cols {
                return Err(Error::Profile(format!(
                    "slot {t}: isometry cannot exist, d_out*d_a[t+1] = {rows} < d_in*d_a[t] = {cols}"
                )));
            }
            if self.d_env[t].is_empty() {
                return Err(Error::Profile(format!("slot {t} has no instruments")));
            }
            for v in 0..self.d_env[t].len() {
                if self.d_env[t][v].is_empty() {
                    return Err(Error::Profile(format!("instrument {v} at slot {t} has no branches")));
                }
                let (rows, cols) = self.instrument_shape(t, v);
                if rows < cols {
                    return Err(Error::Profile(format!(
                        "instrument {v} at slot {t}: stacked dilation {rows}x{cols} cannot be an isometry"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        self.d_out.len()
    }

    pub fn d_in(&self) -> &[usize] {
        &self.d_in
    }

    pub fn d_out(&self) -> &[usize] {
        &self.d_out
    }

    pub fn d_anc(&self) -> &[usize] {
        &self.d_anc
    }

    pub fn d_env(&self) -> &[Vec<Vec<usize>>] {
        &self.d_env
    }

    pub fn d_ref(&self) -> &[usize] {
        &self.d_ref
    }

    pub fn n_states(&self) -> usize {
        self.d_ref.len()
    }

    pub fn n_instruments(&self, slot: usize) -> usize {
        self.d_env[slot].len()
    }

    pub fn n_branches(&self, slot: usize, instrument: usize) -> usize {
        self.d_env[slot][instrument].len()
    }

    /// `(d_out[t]·d_a[t+1], d_in[t]·d_a[t])`.
    pub fn comb_shape(&self, t: usize) -> (usize, usize) {
        (self.d_out[t] * self.d_anc[t + 1], self.d_in[t] * self.d_anc[t])
    }

    /// `(Σ_x d_in[t+1]·d_e[t][v][x], d_out[t])`.
    pub fn instrument_shape(&self, t: usize, v: usize) -> (usize, usize) {
        let rows = self.d_env[t][v].iter().map(|e| self.d_in[t + 1] * e).sum();
        (rows, self.d_out[t])
    }

    pub fn state_shape(&self, u: usize) -> (usize, usize) {
        (self.d_in[0] * self.d_ref[u], 1)
    }

    pub fn factor_ids(&self) -> Vec<FactorId> {
        let mut ids: Vec<FactorId> = (0..self.slots()).map(FactorId::Comb).collect();
        for slot in 0..self.slots() {
            ids.extend((0..self.n_instruments(slot)).map(|index| FactorId::Instrument { slot, index }));
        }
        ids.extend((0..self.n_states()).map(FactorId::State));
        ids
    }

    pub fn factor_shape(&self, id: FactorId) -> (usize, usize) {
        match id {
            FactorId::Comb(t) => self.comb_shape(t),
            FactorId::Instrument { slot, index } => self.instrument_shape(slot, index),
            FactorId::State(u) => self.state_shape(u),
        }
    }

    pub fn factor_shapes(&self) -> Vec<(usize, usize)> {
        self.factor_ids().into_iter().map(|id| self.factor_shape(id)).collect()
    }

    /// Index of a factor in the canonical flattened order.
    pub fn factor_index(&self, id: FactorId) -> usize {
        let n = self.slots();
        match id {
            FactorId::Comb(t) => t,
            FactorId::Instrument { slot, index } => {
                n + (0..slot).map(|s| self.n_instruments(s)).sum::<usize>() + index
            }
            FactorId::State(u) => n + self.d_env.iter().map(Vec::len).sum::<usize>() + u,
        }
    }

    pub fn factor_count(&self) -> usize {
        self.slots() + self.d_env.iter().map(Vec::len).sum::<usize>() + self.n_states()
    }
}

/// Parses a dash-separated ancilla label such as `"1-2-3"` into `d_a[0..=N]`.
///
/// A label shorter than `N + 1` entries is padded by repeating its last
/// entry (so `"1-2-3"` at `N = 3` gives `[1, 2, 3, 3]`); a longer one is an
/// error.
pub fn parse_ancillas(label: &str, slots: usize) -> Result<Vec<usize>> {
    let mut dims = label
        .split(['-', '–'])
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Profile(format!("bad ancilla label {label:?}: {s:?} is not a dimension")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() || dims.len() > slots + 1 {
        return Err(Error::Profile(format!("ancilla label {label:?} does not fit {slots} slots")));
    }
    let last = *dims.last().expect("non-empty");
    dims.resize(slots + 1, last);
    Ok(dims)
}
