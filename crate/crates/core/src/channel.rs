//! Large-scale and small-scale channel models.
//!
//! The power-beacon link is a Rician multi-antenna channel
//! `sqrt(beta) * (los + scatter)` where `los` is the ULA steering vector scaled
//! by `sqrt(kappa / (2 (1 + kappa)))` and `scatter ~ sqrt(1 / (1 + kappa)) CN(0, R)`.
//! The fading vectors stored in [`EhChannel`] are pathloss-free; `beta` is
//! kept separately and applied once by the harvester.
//!
//! The uplink to the base station is scalar Rayleigh with unit-variance `g`
//! and its own average gain `beta_bs`.

use num_complex::Complex;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Speed of light used by default, in m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Hermitian positive semidefinite covariance of the scattering component.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance<T> {
    dim: usize,
    /// Row-major entries.
    entries: Vec<Complex<T>>,
    /// Lower-triangular factor `L` with `L L^H = R`; `None` for the identity.
    factor: Option<Vec<Complex<T>>>,
}

impl<T: Real> Covariance<T> {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex::new(T::zero(), T::zero()); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex::new(T::one(), T::zero());
        }
        Self {
            dim,
            entries,
            factor: None,
        }
    }

    /// Validates `entries` (row-major, `dim * dim`) as Hermitian PSD and
    /// precomputes the sampling factor.
    pub fn new(dim: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(invalid(
                "scattering_covariance",
                format!("expected {} entries, got {}", dim * dim, entries.len()),
            ));
        }
        let scale = entries
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), T::max)
            .max(T::min_positive_value());
        let tol = scale * T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        for i in 0..dim {
            for j in 0..=i {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i].conj();
                if (a - b).norm() > tol {
                    return Err(invalid(
                        "scattering_covariance",
                        format!("not Hermitian at ({i}, {j})"),
                    ));
                }
            }
        }
        let factor = psd_cholesky(dim, &entries, tol)?;
        Ok(Self {
            dim,
            entries,
            factor: Some(factor),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.factor.is_none()
    }

    pub fn trace(&self) -> T {
        (0..self.dim)
            .map(|i| self.entries[i * self.dim + i].re)
            .fold(T::zero(), |a, b| a + b)
    }

    /// Maps a white CN(0, I) vector to CN(0, R).
    fn color(&self, white: Vec<Complex<T>>) -> Vec<Complex<T>> {
        match &self.factor {
            None => white,
            Some(l) => (0..self.dim)
                .map(|i| {
                    (0..=i).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                        acc + l[i * self.dim + j] * white[j]
                    })
                })
                .collect(),
        }
    }
}

/// Cholesky factorization tolerant of rank deficiency. Pivots within `tol`
/// of zero produce a zero column; clearly negative pivots reject the matrix.
fn psd_cholesky<T: Real>(dim: usize, a: &[Complex<T>], tol: T) -> Result<Vec<Complex<T>>> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut l = vec![zero; dim * dim];
    for j in 0..dim {
        let mut d = a[j * dim + j].re;
        for k in 0..j {
            d = d - l[j * dim + k].norm_sqr();
        }
        if d < -tol {
            return Err(invalid(
                "scattering_covariance",
                "matrix is not positive semidefinite",
            ));
        }
        if d <= tol {
            for i in (j + 1)..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s = s - l[i * dim + k] * l[j * dim + k].conj();
                }
                if s.norm() > tol.sqrt() * T::lit(10.0) {
                    return Err(invalid(
                        "scattering_covariance",
                        "matrix is not positive semidefinite",
                    ));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[j * dim + j] = Complex::new(root, T::zero());
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s = s - l[i * dim + k] * l[j * dim + k].conj();
            }
            l[i * dim + j] = s / root;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams<T> {
    pub carrier_frequency_hz: T,
    pub speed_of_light_m_s: T,
    pub pathloss_exponent: T,
    /// Rician factor, linear scale.
    pub rician_kappa: T,
    pub antennas: usize,
    pub pb_user_distance_m: T,
    pub bs_user_distance_m: T,
    pub azimuth_rad: T,
    pub scattering_covariance: Covariance<T>,
}

impl<T: Real> ChannelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("carrier_frequency_hz", self.carrier_frequency_hz)?;
        positive("speed_of_light_m_s", self.speed_of_light_m_s)?;
        positive("pathloss_exponent", self.pathloss_exponent)?;
        positive("rician_kappa", self.rician_kappa)?;
        positive("pb_user_distance_m", self.pb_user_distance_m)?;
        positive("bs_user_distance_m", self.bs_user_distance_m)?;
        if self.antennas == 0 {
            return Err(invalid("antennas", "must be at least 1"));
        }
        if !self.azimuth_rad.is_finite() {
            return Err(invalid("azimuth_rad", "must be finite"));
        }
        if self.scattering_covariance.dim() != self.antennas {
            return Err(invalid(
                "scattering_covariance",
                format!(
                    "dimension {} does not match {} antennas",
                    self.scattering_covariance.dim(),
                    self.antennas
                ),
            ));
        }
        Ok(())
    }
}

/// One realization of the PB-to-user channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EhChannel<T> {
    /// Average power gain of the link (linear).
    pub beta: T,
    pub los: Vec<Complex<T>>,
    pub scatter: Vec<Complex<T>>,
}

impl<T: Real> EhChannel<T> {
    /// Pathloss-free channel vector `los + scatter`.
    pub fn combined(&self) -> impl Iterator<Item = Complex<T>> + '_ {
        self.los.iter().zip(&self.scatter).map(|(a, b)| a + b)
    }
}

/// One realization of the user-to-BS scalar channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataGain<T> {
    pub g: Complex<T>,
    pub beta_bs: T,
}

/// Free-space style average power gain `c^2 / (16 pi^2 f^2 d^alpha)`.
pub fn pathloss_gain<T: Real>(distance_m: T, frequency_hz: T, exponent: T, c: T) -> Result<T> {
    if !(distance_m > T::zero()) {
        return Err(invalid(
            "distance_m",
            format!("must be positive, got {distance_m}"),
        ));
    }
    if !(frequency_hz > T::zero()) {
        return Err(invalid(
            "frequency_hz",
            format!("must be positive, got {frequency_hz}"),
        ));
    }
    let pi = T::lit(std::f64::consts::PI);
    Ok(c * c / (T::lit(16.0) * pi * pi * frequency_hz * frequency_hz * distance_m.powf(exponent)))
}

/// ULA steering vector with half-wavelength spacing. Element `m` has phase
/// `-m pi sin(theta)`.
pub fn los_steering<T: Real>(azimuth_rad: T, kappa: T, antennas: usize) -> Vec<Complex<T>> {
    let amplitude = (kappa / (T::lit(2.0) * (T::one() + kappa))).sqrt();
    let step = -T::lit(std::f64::consts::PI) * azimuth_rad.sin();
    (0..antennas)
        .map(|m| Complex::from_polar(amplitude, step * T::from_usize(m).unwrap()))
        .collect()
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let half = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let re = T::standard_normal(rng);
    let im = T::standard_normal(rng);
    Complex::new(re * half, im * half)
}

pub fn sample_eh_channel<T: Real, R: Rng + ?Sized>(
    params: &ChannelParams<T>,
    rng: &mut R,
) -> Result<EhChannel<T>> {
    params.validate()?;
    let beta = pathloss_gain(
        params.pb_user_distance_m,
        params.carrier_frequency_hz,
        params.pathloss_exponent,
        params.speed_of_light_m_s,
    )?;
    let los = los_steering(params.azimuth_rad, params.rician_kappa, params.antennas);
    let white: Vec<Complex<T>> = (0..params.antennas).map(|_| complex_normal(rng)).collect();
    let scale = (T::one() / (T::one() + params.rician_kappa)).sqrt();
    let scatter = params
        .scattering_covariance
        .color(white)
        .into_iter()
        .map(|z| z * scale)
        .collect();
    Ok(EhChannel { beta, los, scatter })
}

pub fn sample_data_gain<T: Real, R: Rng + ?Sized>(
    params: &ChannelParams<T>,
    rng: &mut R,
) -> Result<DataGain<T>> {
    let beta_bs = pathloss_gain(
        params.bs_user_distance_m,
        params.carrier_frequency_hz,
        params.pathloss_exponent,
        params.speed_of_light_m_s,
    )?;
    Ok(DataGain {
        g: complex_normal(rng),
        beta_bs,
    })
}
