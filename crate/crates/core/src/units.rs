//! dB and power-unit conversions. Only the configuration boundary should need these.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) / 1e3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1e3)
}

/// Thermal noise over `bandwidth_hz` at -174 dBm/Hz plus the receiver noise figure, in watts.
pub fn thermal_noise_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Free-space frequency constant `(c / (4 pi f_c))^2` with `c = 3e8` m/s.
pub fn free_space_constant(carrier_hz: f64) -> f64 {
    (3e8 / (4.0 * std::f64::consts::PI * carrier_hz)).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_floor_for_two_gigahertz() {
        let n = thermal_noise_watts(2e9, 7.0);
        assert!((watts_to_dbm(n) - (-73.989_700_043)).abs() < 1e-6);
        assert!((n - 3.990_524_629_9e-11).abs() / n < 1e-9);
    }

    #[test]
    fn dbm_round_trip() {
        for dbm in [-80.0, 0.0, 25.0, 35.0] {
            assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-12);
        }
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
    }
}
