//! Unit-suffixed quantities used by the netlist.
//!
//! A quantity is a number followed by a unit, optionally separated by
//! spaces: `"3 dB"`, `"0.2dB/km"`, `"-40 ps"`, `"1550 nm"`, `"0.5 pi"`.
//! Values are converted to SI base units (seconds, radians, rad/s, km for
//! fiber lengths).

use std::f64::consts::{PI, TAU};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    /// dB.
    Loss,
    /// dB/km.
    LossPerLength,
    /// km.
    Length,
    /// rad.
    Angle,
    /// s.
    Time,
    /// rad/s. Frequencies in Hz are multiplied by 2π and wavelengths are
    /// converted with `2πc/λ`.
    AngularFrequency,
    /// 1/s.
    Rate,
    /// s/km.
    DelayPerLength,
}

impl Quantity {
    pub fn describe(self) -> &'static str {
        match self {
            Quantity::Loss => "a loss in dB",
            Quantity::LossPerLength => "an attenuation in dB/km",
            Quantity::Length => "a length in km or m",
            Quantity::Angle => "an angle in rad, mrad, deg or pi",
            Quantity::Time => "a time in s, ms, us, ns, ps or fs",
            Quantity::AngularFrequency => "a frequency in rad/s, Hz (times 2pi) or a wavelength in nm/um",
            Quantity::Rate => "a rate in Hz or /s",
            Quantity::DelayPerLength => "a delay per length such as us/km",
        }
    }
}

fn prefix(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" | "μ" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        "T" => 1e12,
        "P" => 1e15,
        _ => return None,
    })
}

fn time_unit(u: &str) -> Option<f64> {
    let p = u.strip_suffix('s')?;
    match p {
        "" | "m" | "u" | "µ" | "μ" | "n" | "p" | "f" => prefix(p),
        _ => None,
    }
}

fn hertz(u: &str) -> Option<f64> {
    prefix(u.strip_suffix("Hz")?)
}

fn scale(unit: &str, kind: Quantity) -> Option<Box<dyn Fn(f64) -> f64>> {
    let linear = |k: f64| -> Option<Box<dyn Fn(f64) -> f64>> { Some(Box::new(move |x| x * k)) };
    match kind {
        Quantity::Loss => (unit == "dB").then(|| linear(1.0)).flatten(),
        Quantity::LossPerLength => match unit {
            "dB/km" => linear(1.0),
            "dB/m" => linear(1e3),
            _ => None,
        },
        Quantity::Length => match unit {
            "km" => linear(1.0),
            "m" => linear(1e-3),
            _ => None,
        },
        Quantity::Angle => match unit {
            "rad" => linear(1.0),
            "mrad" => linear(1e-3),
            "deg" => linear(PI / 180.0),
            "pi" => linear(PI),
            _ => None,
        },
        Quantity::Time => time_unit(unit).and_then(linear),
        Quantity::AngularFrequency => {
            if let Some(k) = unit.strip_suffix("rad/s").and_then(prefix) {
                linear(k)
            } else if let Some(k) = hertz(unit) {
                linear(TAU * k)
            } else {
                let metres = match unit {
                    "nm" => 1e-9,
                    "um" | "µm" | "μm" => 1e-6,
                    _ => return None,
                };
                Some(Box::new(move |x| TAU * SPEED_OF_LIGHT / (x * metres)))
            }
        }
        Quantity::Rate => {
            if unit == "/s" {
                linear(1.0)
            } else {
                hertz(unit).and_then(linear)
            }
        }
        Quantity::DelayPerLength => {
            let (t, l) = unit.split_once('/')?;
            let per = match l {
                "km" => 1.0,
                "m" => 1e3,
                _ => return None,
            };
            time_unit(t).and_then(|k| linear(k * per))
        }
    }
}

/// Splits `"12.5e-3 ns"` into the number and the unit text.
fn split_number(text: &str) -> Option<(f64, &str)> {
    let text = text.trim();
    if text == "pi" {
        return Some((1.0, "pi"));
    }
    let end = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && i > 0
                    && text[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+')))
        })
        .map_or(text.len(), |(i, _)| i);
    let number = text[..end].parse().ok()?;
    Some((number, text[end..].trim()))
}

/// Parses a unit-suffixed quantity into SI base units.
pub fn parse_quantity(text: &str, kind: Quantity) -> Result<f64, String> {
    let (number, unit) =
        split_number(text).ok_or_else(|| format!("cannot read a number from \"{text}\""))?;
    if unit.is_empty() {
        return Err(format!("\"{text}\" needs a unit: expected {}", kind.describe()));
    }
    let convert = scale(unit, kind)
        .ok_or_else(|| format!("unit \"{unit}\" in \"{text}\" is not {}", kind.describe()))?;
    let value = convert(number);
    if !value.is_finite() {
        return Err(format!("\"{text}\" is not a finite quantity"));
    }
    Ok(value)
}
