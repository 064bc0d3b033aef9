//! Figure data: evaluation grids, the three sweep tables, and their CSV/JSON
//! encodings.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{
    ambiguity_floor, ambiguity_vs_info_curve, floor_at_margin, CurveKind, OrthantPolytope,
    PrecisionLimit,
};
use crate::resolution::{resolution_info_region, AmbiguityTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Lin,
    Log,
}

/// `points` values from `min` to `max`, evenly spaced on a linear or
/// logarithmic axis. Written `lo:hi:n:lin|log`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    min: f64,
    max: f64,
    points: usize,
    scale: Scale,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize, scale: Scale) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::invalid(
                "grid",
                format!("need finite min < max, got {min}:{max}"),
            ));
        }
        if points < 2 {
            return Err(Error::invalid(
                "grid",
                format!("need at least 2 points, got {points}"),
            ));
        }
        if scale == Scale::Log && min <= 0.0 {
            return Err(Error::invalid("grid", "log scale needs positive endpoints"));
        }
        Ok(GridSpec {
            min,
            max,
            points,
            scale,
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Grid values; both endpoints are reproduced exactly.
    pub fn values(&self) -> Vec<f64> {
        let last = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == last {
                    return self.max;
                }
                let t = i as f64 / last as f64;
                match self.scale {
                    Scale::Lin => self.min + t * (self.max - self.min),
                    Scale::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }

    /// Values rounded to integers; fails if any point is not within 1e-9 of one.
    pub fn integer_values(&self) -> Result<Vec<usize>> {
        self.values()
            .into_iter()
            .map(|v| {
                let r = v.round();
                if (v - r).abs() > 1e-9 || r < 1.0 {
                    Err(Error::invalid(
                        "grid",
                        format!("{v} is not a positive integer"),
                    ))
                } else {
                    Ok(r as usize)
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(Error::invalid(
                "grid",
                format!("expected lo:hi:n:lin|log, got {s:?}"),
            ));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid("grid", format!("{t:?} is not a number")))
        };
        let points = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid("grid", format!("{:?} is not a point count", parts[2])))?;
        let scale = match parts[3].trim() {
            "lin" => Scale::Lin,
            "log" => Scale::Log,
            other => return Err(Error::invalid("grid", format!("unknown scale {other:?}"))),
        };
        GridSpec::new(num(parts[0])?, num(parts[1])?, points, scale)
    }
}

/// Named columns of doubles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Header row plus one line per row, 17 significant digits, `\n` endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Resolution information over prior mass × ambiguity target, row-major in
/// prior mass.
pub fn tradeoff_table(prior_mass: &GridSpec, epsilon: &GridSpec) -> Result<Table> {
    let masses = prior_mass.values();
    let targets = epsilon
        .values()
        .into_iter()
        .map(|e| AmbiguityTarget::new(e).map(|t| (e, t)))
        .collect::<Result<Vec<_>>>()?;
    let rows = masses
        .par_iter()
        .map(|&p| {
            targets
                .iter()
                .map(|&(e, t)| Ok(vec![p, e, resolution_info_region(p, t)?]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table {
        columns: vec!["prior_mass", "epsilon", "info_nats"],
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Polytope ambiguity floor over dimension × maximum margin.
pub fn floor_table(dimension: &GridSpec, mu_max: &GridSpec) -> Result<Table> {
    let dims = dimension.integer_values()?;
    let margins = mu_max.values();
    if let Some(&mu) = margins.iter().find(|&&mu| mu <= 0.0) {
        return Err(Error::invalid("mu_max", format!("{mu} must be positive")));
    }
    let rows: Vec<Vec<f64>> = dims
        .par_iter()
        .flat_map_iter(|&m| {
            margins
                .iter()
                .map(move |&mu| vec![m as f64, mu, floor_at_margin(m, mu).epsilon_min])
        })
        .collect();
    Ok(Table {
        columns: vec!["m", "mu_max", "epsilon_min"],
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCurveParams {
    pub delta0: f64,
    pub polytope: OrthantPolytope,
    pub sigma0: f64,
    pub limit: PrecisionLimit,
}

/// Half-space and polytope ambiguity against information spent, with the
/// polytope floor repeated on every row.
pub fn decay_curves_table(params: &DecayCurveParams, info: &GridSpec) -> Result<Table> {
    if !params.delta0.is_finite() {
        return Err(Error::invalid("delta0", "must be finite"));
    }
    let grid = info.values();
    let half = ambiguity_vs_info_curve(
        CurveKind::HalfSpace {
            delta0: params.delta0,
        },
        &grid,
    )?;
    let poly = ambiguity_vs_info_curve(
        CurveKind::Polytope {
            sigma0: params.sigma0,
            polytope: params.polytope,
            limit: params.limit,
        },
        &grid,
    )?;
    if let Some(p) = poly.iter().find(|p| !p.converged) {
        return Err(Error::ConvergenceFailure {
            iterations: 200,
            best: p.ambiguity,
        });
    }
    let floor = ambiguity_floor(&params.polytope, &params.limit).epsilon_min;
    let rows = grid
        .iter()
        .zip(half.iter().zip(&poly))
        .map(|(&i, (h, p))| vec![i, h.ambiguity, p.ambiguity, floor])
        .collect();
    Ok(Table {
        columns: vec![
            "info_nats",
            "halfspace_ambiguity",
            "polytope_ambiguity",
            "floor",
        ],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "0.001:0.15:5:log".parse().unwrap();
        let v = g.values();
        assert_eq!(v[0], 0.001);
        assert_eq!(v[4], 0.15);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((v[1] / v[0] - v[2] / v[1]).abs() < 1e-12);
        let g: GridSpec = "0:50:201:lin".parse().unwrap();
        assert_eq!(g.values()[4], 1.0);
        for bad in [
            "1:0:5:lin",
            "0:1:1:lin",
            "0:1:5:log",
            "0:1:5",
            "a:1:5:lin",
            "0:1:5:cubic",
        ] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn integer_axis() {
        let g: GridSpec = "1:20:20:lin".parse().unwrap();
        assert_eq!(g.integer_values().unwrap(), (1..=20).collect::<Vec<_>>());
        let g: GridSpec = "1:2:3:lin".parse().unwrap();
        assert!(g.integer_values().is_err());
    }

    #[test]
    fn csv_layout() {
        let t = Table {
            columns: vec!["a", "b"],
            rows: vec![vec![0.1, 2.0], vec![-1.0 / 3.0, 0.0]],
        };
        let csv = t.to_csv();
        assert_eq!(
            csv,
            "a,b\n1.0000000000000001e-1,2.0000000000000000e0\n-3.3333333333333331e-1,0.0000000000000000e0\n"
        );
        for (line, row) in csv.lines().skip(1).zip(&t.rows) {
            let parsed: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(&parsed, row);
        }
    }

    #[test]
    fn tradeoff_cells() {
        let p: GridSpec = "0.05:0.1:2:lin".parse().unwrap();
        let e: GridSpec = "0.01:0.95:2:lin".parse().unwrap();
        let t = tradeoff_table(&p, &e).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[2][..2], [0.1, 0.01]);
        assert!((t.rows[2][2] - 2.224_611_312_865_836).abs() < 1e-12);
        assert_eq!(t.rows[3][2], 0.0);
        let bad: GridSpec = "0:0.1:2:lin".parse().unwrap();
        assert!(tradeoff_table(&bad, &e).is_err());
    }

    #[test]
    fn floor_cells() {
        let m: GridSpec = "1:5:5:lin".parse().unwrap();
        let mu: GridSpec = "2.13:38:2:lin".parse().unwrap();
        let t = floor_table(&m, &mu).unwrap();
        assert_eq!(t.rows.len(), 10);
        assert_eq!(t.rows[8][..2], [5.0, 2.13]);
        assert!((t.rows[8][2] - 0.080_223_392_196_921_24).abs() < 1e-15);
        assert!(t.rows[9][2] < f64::MIN_POSITIVE);
    }

    #[test]
    fn decay_rows() {
        let polytope = OrthantPolytope::new(5, 1.0).unwrap();
        let params = DecayCurveParams {
            delta0: 0.0,
            polytope,
            sigma0: 1.0,
            limit: PrecisionLimit::from_margin(&polytope, 2.13).unwrap(),
        };
        let info: GridSpec = "0:50:11:lin".parse().unwrap();
        let t = decay_curves_table(&params, &info).unwrap();
        assert_eq!(t.rows[0][1], 0.5);
        let last = t.rows.last().unwrap();
        assert!(last[1] < 1e-10);
        assert_eq!(last[2], last[3]);
    }
}
