//! Numbers with unit suffixes, normalized to SI with angular rates.
//!
//! A bare number is taken as already normalized. A string is a number, a
//! space, and one of the units below; frequencies in Hz are converted to
//! rad/s by 2π.

use std::f64::consts::PI;

use crate::units::{ev, BARN};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Rate,
    ElectricField,
    MagneticField,
    Temperature,
    Time,
    Length,
    Area,
    Density,
    Volume,
    Wavenumber,
    Gyromagnetic,
    OnqResponse,
    Dimensionless,
}

impl Dim {
    pub fn si_unit(self) -> &'static str {
        match self {
            Dim::Rate => "rad/s",
            Dim::ElectricField => "V/m",
            Dim::MagneticField => "T",
            Dim::Temperature => "K",
            Dim::Time => "s",
            Dim::Length => "m",
            Dim::Area => "m^2",
            Dim::Density => "m^-3",
            Dim::Volume => "m^3",
            Dim::Wavenumber => "m^-1",
            Dim::Gyromagnetic => "rad/s/T",
            Dim::OnqResponse => "rad/s/(V/m)^2",
            Dim::Dimensionless => "1",
        }
    }
}

const TWO_PI: f64 = 2.0 * PI;

fn lookup(unit: &str) -> Option<(Dim, f64)> {
    let hz_field = TWO_PI * 1e-12;
    Some(match unit {
        "rad/s" => (Dim::Rate, 1.0),
        "Hz" => (Dim::Rate, TWO_PI),
        "kHz" => (Dim::Rate, TWO_PI * 1e3),
        "MHz" => (Dim::Rate, TWO_PI * 1e6),
        "GHz" => (Dim::Rate, TWO_PI * 1e9),
        "eV" => (Dim::Rate, ev(1.0)),
        "meV" => (Dim::Rate, ev(1e-3)),
        "V/m" => (Dim::ElectricField, 1.0),
        "kV/m" => (Dim::ElectricField, 1e3),
        "MV/m" => (Dim::ElectricField, 1e6),
        "T" => (Dim::MagneticField, 1.0),
        "mT" => (Dim::MagneticField, 1e-3),
        "K" => (Dim::Temperature, 1.0),
        "mK" => (Dim::Temperature, 1e-3),
        "uK" | "µK" => (Dim::Temperature, 1e-6),
        "s" => (Dim::Time, 1.0),
        "ms" => (Dim::Time, 1e-3),
        "us" | "µs" => (Dim::Time, 1e-6),
        "ns" => (Dim::Time, 1e-9),
        "m" => (Dim::Length, 1.0),
        "um" | "µm" => (Dim::Length, 1e-6),
        "nm" => (Dim::Length, 1e-9),
        "A" | "Å" => (Dim::Length, 1e-10),
        "barn" => (Dim::Area, BARN),
        "m^2" => (Dim::Area, 1.0),
        "m^-3" => (Dim::Density, 1.0),
        "cm^-3" => (Dim::Density, 1e6),
        "m^3" => (Dim::Volume, 1.0),
        "um^3" | "µm^3" => (Dim::Volume, 1e-18),
        "m^-1" => (Dim::Wavenumber, 1.0),
        "nm^-1" => (Dim::Wavenumber, 1e9),
        "rad/s/T" => (Dim::Gyromagnetic, 1.0),
        "Hz/T" => (Dim::Gyromagnetic, TWO_PI),
        "kHz/T" => (Dim::Gyromagnetic, TWO_PI * 1e3),
        "MHz/T" => (Dim::Gyromagnetic, TWO_PI * 1e6),
        "rad/s/(V/m)^2" => (Dim::OnqResponse, 1.0),
        "Hz/(MV/m)^2" => (Dim::OnqResponse, hz_field),
        "kHz/(MV/m)^2" => (Dim::OnqResponse, hz_field * 1e3),
        _ => return None,
    })
}

/// Parses `"<number> <unit>"` as a quantity of dimension `dim`.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64, String> {
    let text = text.trim();
    let (num, unit) = match text.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => (text, ""),
    };
    let value: f64 = num
        .parse()
        .map_err(|_| format!("cannot read a number from `{text}`"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    if unit.is_empty() {
        return Ok(value);
    }
    match lookup(unit) {
        Some((d, factor)) if d == dim => Ok(value * factor),
        Some((d, _)) => Err(format!(
            "unit `{unit}` measures {d:?}, expected {dim:?} ({})",
            dim.si_unit()
        )),
        None => Err(format!("unknown unit `{unit}`")),
    }
}
