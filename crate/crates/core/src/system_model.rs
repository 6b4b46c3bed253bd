//! Finite-horizon discrete LTV systems and their lifted input-output maps.
//!
//! A system over steps `t = 0..T-1` is
//!
//! ```text
//! x(t+1) = A(t) x(t) + B(t) u(t)
//! y(t)   = C(t) x(t) + D(t) u(t)
//! ```
//!
//! and stacking inputs and outputs over the horizon gives `y = G u + L x(0)`.
//! Stacked trajectories are always ordered `col(u, y)`: the whole input block
//! first, then the whole output block.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major matrix literal as it appears in scenario files.
pub type Rows = Vec<Vec<f64>>;

/// How a matrix evolves over the horizon in a raw system description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSchedule {
    /// `M(t) = base + t * slope`.
    Affine { base: Rows, slope: Rows },
    /// One matrix per step; length must equal the horizon.
    PerStep { steps: Vec<Rows> },
    /// The same matrix at every step.
    Constant(Rows),
}

impl MatrixSchedule {
    fn expand(&self, name: &str, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
        match self {
            MatrixSchedule::Constant(rows) => {
                let m = rows_to_matrix(rows, name, 0)?;
                Ok(vec![m; horizon])
            }
            MatrixSchedule::Affine { base, slope } => {
                let m0 = rows_to_matrix(base, name, 0)?;
                let m1 = rows_to_matrix(slope, name, 0)?;
                if m0.shape() != m1.shape() {
                    return Err(Error::DimensionMismatch {
                        matrix: format!("{name}.slope"),
                        step: 0,
                        expected: shape_str(m0.shape()),
                        found: shape_str(m1.shape()),
                    });
                }
                Ok((0..horizon).map(|t| &m0 + &m1 * t as f64).collect())
            }
            MatrixSchedule::PerStep { steps } => {
                if steps.len() != horizon {
                    return Err(Error::Scenario(format!(
                        "{name} lists {} steps but the horizon is {horizon}",
                        steps.len()
                    )));
                }
                steps
                    .iter()
                    .enumerate()
                    .map(|(t, rows)| rows_to_matrix(rows, name, t))
                    .collect()
            }
        }
    }
}

/// Raw, unvalidated system description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub a: MatrixSchedule,
    pub b: MatrixSchedule,
    pub c: MatrixSchedule,
    pub d: MatrixSchedule,
    pub x0: Vec<f64>,
}

impl SystemSpec {
    /// Expand schedules over `horizon` steps and check every dimension.
    pub fn validate(&self, horizon: usize) -> Result<LtvSystem> {
        if horizon == 0 {
            return Err(Error::EmptyHorizon);
        }
        LtvSystem::new(
            self.a.expand("A", horizon)?,
            self.b.expand("B", horizon)?,
            self.c.expand("C", horizon)?,
            self.d.expand("D", horizon)?,
            DVector::from_vec(self.x0.clone()),
        )
    }
}

fn shape_str((r, c): (usize, usize)) -> String {
    format!("{r}x{c}")
}

fn rows_to_matrix(rows: &Rows, name: &str, step: usize) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            matrix: name.to_string(),
            step,
            expected: format!("rows of length {ncols}"),
            found: format!("a row of length {}", bad.len()),
        });
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

/// Validated LTV system over a fixed horizon, with per-step matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct LtvSystem {
    n_x: usize,
    n_u: usize,
    n_y: usize,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
    d: Vec<DMatrix<f64>>,
    x0: DVector<f64>,
}

impl LtvSystem {
    /// Build a system from per-step matrices. Dimensions are taken from
    /// `A(0)` (state), `B(0)` (input) and `C(0)` (output).
    pub fn new(
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        c: Vec<DMatrix<f64>>,
        d: Vec<DMatrix<f64>>,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let horizon = a.len();
        if horizon == 0 {
            return Err(Error::EmptyHorizon);
        }
        for (name, seq) in [("B", &b), ("C", &c), ("D", &d)] {
            if seq.len() != horizon {
                return Err(Error::Incompatible(format!(
                    "{name} has {} steps but A has {horizon}",
                    seq.len()
                )));
            }
        }
        let n_x = a[0].nrows();
        let n_u = b[0].ncols();
        let n_y = c[0].nrows();
        if n_x == 0 || n_u == 0 || n_y == 0 {
            return Err(Error::InvalidParameter(format!(
                "state, input and output dimensions must be positive (got {n_x}, {n_u}, {n_y})"
            )));
        }
        let expected = [
            ("A", &a, (n_x, n_x)),
            ("B", &b, (n_x, n_u)),
            ("C", &c, (n_y, n_x)),
            ("D", &d, (n_y, n_u)),
        ];
        for (t, _) in a.iter().enumerate() {
            for (name, seq, shape) in &expected {
                let m = &seq[t];
                if m.shape() != *shape {
                    return Err(Error::DimensionMismatch {
                        matrix: name.to_string(),
                        step: t,
                        expected: shape_str(*shape),
                        found: shape_str(m.shape()),
                    });
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        matrix: name.to_string(),
                        step: t,
                    });
                }
            }
        }
        if x0.len() != n_x {
            return Err(Error::DimensionMismatch {
                matrix: "x0".into(),
                step: 0,
                expected: format!("{n_x}x1"),
                found: format!("{}x1", x0.len()),
            });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                matrix: "x0".into(),
                step: 0,
            });
        }
        Ok(Self {
            n_x,
            n_u,
            n_y,
            a,
            b,
            c,
            d,
            x0,
        })
    }

    /// Same `(A, B, C, D)` at every step.
    pub fn time_invariant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        x0: DVector<f64>,
        horizon: usize,
    ) -> Result<Self> {
        Self::new(
            vec![a; horizon],
            vec![b; horizon],
            vec![c; horizon],
            vec![d; horizon],
            x0,
        )
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_w(&self) -> usize {
        self.n_u + self.n_y
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self, t: usize) -> &DMatrix<f64> {
        &self.a[t]
    }

    pub fn b(&self, t: usize) -> &DMatrix<f64> {
        &self.b[t]
    }

    pub fn c(&self, t: usize) -> &DMatrix<f64> {
        &self.c[t]
    }

    pub fn d(&self, t: usize) -> &DMatrix<f64> {
        &self.d[t]
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    /// Copy of the system with a different initial state.
    pub fn with_initial_state(&self, x0: DVector<f64>) -> Result<Self> {
        Error::check_len("initial state", self.n_x, x0.len())?;
        Ok(Self { x0, ..self.clone() })
    }

    /// `Φ(t_end, t_start) = A(t_end-1) ··· A(t_start)`, identity when the
    /// range is empty.
    pub fn state_transition(&self, t_end: usize, t_start: usize) -> Result<DMatrix<f64>> {
        let horizon = self.horizon();
        if t_start > t_end || t_end > horizon {
            return Err(Error::InvalidStepRange {
                start: t_start,
                end: t_end,
                horizon,
            });
        }
        let mut phi = DMatrix::identity(self.n_x, self.n_x);
        for t in t_start..t_end {
            phi = &self.a[t] * phi;
        }
        Ok(phi)
    }

    /// Build the lifted operators `G` and `L` with `y = G u + L x(0)`.
    pub fn lift(&self) -> LiftedOperators {
        let (n_x, n_u, n_y, horizon) = (self.n_x, self.n_u, self.n_y, self.horizon());
        let mut g = DMatrix::zeros(n_y * horizon, n_u * horizon);
        let mut l = DMatrix::zeros(n_y * horizon, n_x);
        for t in 0..horizon {
            g.view_mut((t * n_y, t * n_u), (n_y, n_u))
                .copy_from(&self.d[t]);
            // c_phi = C(t) Φ(t, τ+1), extended one factor of A at a time.
            let mut c_phi = self.c[t].clone();
            for tau in (0..t).rev() {
                let block = &c_phi * &self.b[tau];
                g.view_mut((t * n_y, tau * n_u), (n_y, n_u))
                    .copy_from(&block);
                c_phi = &c_phi * &self.a[tau];
            }
            l.view_mut((t * n_y, 0), (n_y, n_x)).copy_from(&c_phi);
        }
        LiftedOperators {
            g,
            l,
            n_x,
            n_u,
            n_y,
            horizon,
        }
    }

    /// Simulate the recursion step by step from `x0` under the stacked input `u`.
    pub fn rollout(&self, u: &DVector<f64>, x0: &DVector<f64>) -> Result<Trajectory> {
        let (n_u, n_y, horizon) = (self.n_u, self.n_y, self.horizon());
        Error::check_len("stacked input", n_u * horizon, u.len())?;
        Error::check_len("initial state", self.n_x, x0.len())?;
        let mut x = x0.clone();
        let mut y = DVector::zeros(n_y * horizon);
        for t in 0..horizon {
            let ut = u.rows(t * n_u, n_u);
            let yt = &self.c[t] * &x + &self.d[t] * ut;
            y.rows_mut(t * n_y, n_y).copy_from(&yt);
            x = &self.a[t] * &x + &self.b[t] * ut;
        }
        Ok(Trajectory::new(u.clone(), y))
    }
}

/// Lifted input-output map `G` (`n_y T x n_u T`) and initial-state map `L`
/// (`n_y T x n_x`) of one system.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedOperators {
    pub g: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub horizon: usize,
}

impl LiftedOperators {
    pub fn input_len(&self) -> usize {
        self.n_u * self.horizon
    }

    pub fn output_len(&self) -> usize {
        self.n_y * self.horizon
    }

    pub fn trajectory_len(&self) -> usize {
        self.input_len() + self.output_len()
    }

    /// `G u + L x0`.
    pub fn output(&self, u: &DVector<f64>, x0: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len("stacked input", self.input_len(), u.len())?;
        Error::check_len("initial state", self.n_x, x0.len())?;
        Ok(&self.g * u + &self.l * x0)
    }

    /// The constraint matrix `[-G, I]` whose solution set with right-hand
    /// side `L x0` is the admissible behavior.
    pub fn constraint_matrix(&self) -> DMatrix<f64> {
        let (ny, nu) = (self.output_len(), self.input_len());
        let mut m = DMatrix::zeros(ny, nu + ny);
        m.view_mut((0, 0), (ny, nu)).copy_from(&(-&self.g));
        m.view_mut((0, nu), (ny, ny)).fill_with_identity();
        m
    }

    /// `[-G, I] w - L x0`, computed blockwise.
    pub fn constraint_defect(&self, w: &DVector<f64>, x0: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len("stacked trajectory", self.trajectory_len(), w.len())?;
        let nu = self.input_len();
        let u = w.rows(0, nu).into_owned();
        let y = w.rows(nu, self.output_len());
        Ok(y - self.output(&u, x0)?)
    }

    /// Whether inputs, outputs and horizon agree, so both behaviors live in
    /// the same trajectory space. State dimensions may differ.
    pub fn check_compatible(&self, other: &LiftedOperators) -> Result<()> {
        if self.n_u != other.n_u || self.n_y != other.n_y || self.horizon != other.horizon {
            return Err(Error::Incompatible(format!(
                "(n_u, n_y, T) = ({}, {}, {}) vs ({}, {}, {})",
                self.n_u, self.n_y, self.horizon, other.n_u, other.n_y, other.horizon
            )));
        }
        Ok(())
    }
}

/// Stacked input, output and the combined `w = col(u, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
}

impl Trajectory {
    pub fn new(u: DVector<f64>, y: DVector<f64>) -> Self {
        let w = DVector::from_iterator(u.len() + y.len(), u.iter().chain(y.iter()).copied());
        Self { u, y, w }
    }

    /// Split a stacked `w` whose first `input_len` entries are the input block.
    pub fn from_stacked(w: DVector<f64>, input_len: usize) -> Result<Self> {
        if input_len > w.len() {
            return Err(Error::LengthMismatch {
                what: "stacked trajectory",
                expected: input_len,
                found: w.len(),
            });
        }
        let u = w.rows(0, input_len).into_owned();
        let y = w.rows(input_len, w.len() - input_len).into_owned();
        Ok(Self { u, y, w })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn integrator(horizon: usize) -> LtvSystem {
        LtvSystem::time_invariant(
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[0.0]),
            DVector::from_element(1, 0.0),
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn scalar_system_accepted() {
        let spec = SystemSpec {
            a: MatrixSchedule::Constant(vec![vec![1.0]]),
            b: MatrixSchedule::Constant(vec![vec![1.0]]),
            c: MatrixSchedule::Constant(vec![vec![1.0]]),
            d: MatrixSchedule::Constant(vec![vec![0.0]]),
            x0: vec![0.0],
        };
        let sys = spec.validate(2).unwrap();
        assert_eq!(
            (sys.n_x(), sys.n_u(), sys.n_y(), sys.horizon()),
            (1, 1, 1, 2)
        );
    }

    #[test]
    fn mismatched_input_matrix_names_b0() {
        let spec = SystemSpec {
            a: MatrixSchedule::Constant(vec![vec![0.0; 3]; 3]),
            b: MatrixSchedule::Constant(vec![vec![1.0]; 2]),
            c: MatrixSchedule::Constant(vec![vec![1.0, 0.0, 0.0]]),
            d: MatrixSchedule::Constant(vec![vec![0.0]]),
            x0: vec![0.0; 3],
        };
        let err = spec.validate(4).unwrap_err();
        assert!(
            err.to_string().starts_with("dimension mismatch at B(0)"),
            "{err}"
        );
    }

    #[test]
    fn non_finite_and_empty_horizon_rejected() {
        let spec = SystemSpec {
            a: MatrixSchedule::Constant(vec![vec![1.0]]),
            b: MatrixSchedule::Constant(vec![vec![1.0]]),
            c: MatrixSchedule::Constant(vec![vec![f64::NAN]]),
            d: MatrixSchedule::Constant(vec![vec![0.0]]),
            x0: vec![0.0],
        };
        assert!(matches!(spec.validate(2), Err(Error::NonFinite { .. })));
        assert!(matches!(spec.validate(0), Err(Error::EmptyHorizon)));
    }

    #[test]
    fn per_step_schedule_length_checked() {
        let spec = SystemSpec {
            a: MatrixSchedule::PerStep {
                steps: vec![vec![vec![1.0]], vec![vec![2.0]]],
            },
            b: MatrixSchedule::Constant(vec![vec![1.0]]),
            c: MatrixSchedule::Constant(vec![vec![1.0]]),
            d: MatrixSchedule::Constant(vec![vec![0.0]]),
            x0: vec![0.0],
        };
        assert_eq!(spec.validate(2).unwrap().a(1)[(0, 0)], 2.0);
        assert!(spec.validate(3).is_err());
    }

    #[test]
    fn affine_schedule_expands_per_step() {
        let spec = SystemSpec {
            a: MatrixSchedule::Affine {
                base: vec![vec![0.0, 1.0], vec![0.0, -2.5]],
                slope: vec![vec![0.05, 0.0], vec![0.0, 0.05]],
            },
            b: MatrixSchedule::Constant(vec![vec![1.0], vec![0.0]]),
            c: MatrixSchedule::Constant(vec![vec![1.0, 0.0]]),
            d: MatrixSchedule::Constant(vec![vec![0.0]]),
            x0: vec![0.0, 0.0],
        };
        let sys = spec.validate(25).unwrap();
        assert!((sys.a(3)[(0, 0)] - 0.15).abs() < 1e-15);
        assert!((sys.a(24)[(1, 1)] - (-2.5 + 1.2)).abs() < 1e-14);
    }

    #[test]
    fn state_transition_basics() {
        let sys = LtvSystem::time_invariant(
            m(1, 1, &[2.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[0.0]),
            DVector::zeros(1),
            5,
        )
        .unwrap();
        assert_eq!(sys.state_transition(3, 1).unwrap()[(0, 0)], 4.0);
        assert_eq!(sys.state_transition(2, 2).unwrap(), DMatrix::identity(1, 1));
        assert!(matches!(
            sys.state_transition(1, 3),
            Err(Error::InvalidStepRange { .. })
        ));
        assert!(sys.state_transition(6, 0).is_err());
    }

    #[test]
    fn integrator_lift_and_rollout() {
        let sys = integrator(2);
        let lifted = sys.lift();
        assert_eq!(lifted.g, m(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(lifted.l, m(2, 1, &[1.0, 1.0]));

        let traj = sys
            .rollout(&DVector::from_vec(vec![1.0, 0.0]), &DVector::zeros(1))
            .unwrap();
        assert_eq!(traj.y.as_slice(), &[0.0, 1.0]);
        assert_eq!(traj.w.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_output_map_leaves_feedthrough_only() {
        let d = m(1, 2, &[0.5, -1.0]);
        let sys = LtvSystem::time_invariant(
            m(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            m(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DMatrix::zeros(1, 2),
            d.clone(),
            DVector::from_vec(vec![1.0, -1.0]),
            3,
        )
        .unwrap();
        let lifted = sys.lift();
        assert!(lifted.l.iter().all(|&v| v == 0.0));
        let mut expected = DMatrix::zeros(3, 6);
        for t in 0..3 {
            expected.view_mut((t, 2 * t), (1, 2)).copy_from(&d);
        }
        assert_eq!(lifted.g, expected);
    }

    #[test]
    fn rollout_rejects_wrong_length() {
        let sys = integrator(3);
        assert!(matches!(
            sys.rollout(&DVector::zeros(2), &DVector::zeros(1)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn zero_input_zero_state_gives_zero_output() {
        let sys = integrator(4);
        let traj = sys.rollout(&DVector::zeros(4), &DVector::zeros(1)).unwrap();
        assert!(traj.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trajectory_split_matches_concat() {
        let t = Trajectory::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![3.0]),
        );
        let back = Trajectory::from_stacked(t.w.clone(), 2).unwrap();
        assert_eq!(t, back);
    }
}
