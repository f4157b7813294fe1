//! Derivative-free minimization (Nelder-Mead with dimension-adapted
//! coefficients).

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub value_tol: f64,
    pub diameter_tol: f64,
    pub max_evaluations: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            value_tol: 1e-10,
            diameter_tol: 1e-8,
            max_evaluations: 10_000,
        }
    }
}

/// Minimizes `f` from `start` using an axis-aligned initial simplex of edge `step`.
pub(crate) fn nelder_mead<F>(mut f: F, start: &[f64], step: f64, settings: Settings) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let d = start.len();
    if d == 0 {
        let value = f(start);
        return Minimum {
            x: Vec::new(),
            value,
            evaluations: 1,
            converged: true,
        };
    }
    let dn = d as f64;
    let (reflect, expand) = (1.0, 1.0 + 2.0 / dn);
    let contract = 0.75 - 1.0 / (2.0 * dn);
    let shrink = 1.0 - 1.0 / dn;

    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(start.to_vec());
    for k in 0..d {
        let mut v = start.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evaluations)).collect();
    let mut converged = false;

    while evaluations < settings.max_evaluations {
        // Stable sort keeps an earlier vertex ahead on ties, so an exact
        // optimum at the start point is never displaced by an equal value.
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= settings.value_tol && diameter <= settings.diameter_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dn;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(reflect);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[0] {
            let xe = along(reflect * expand);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let xc = along(reflect * contract);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-contract);
            let fc = eval(&xc, &mut evaluations);
            (xc, fc)
        };
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=d {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + shrink * (*x - b);
            }
            values[i] = eval(&simplex[i], &mut evaluations);
        }
    }

    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}
