//! Fuel-mix CO2 accounting.
//!
//! Mass in kilotons is `energy_GWh * cef_g_per_kWh / 1000`: one GWh at one
//! gram per kWh is one tonne. Diesel and furnace oil share a single factor
//! and are summed before it is applied. Imported electricity has no factor
//! and is carried as energy only.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registry seeded with the shipped default factors.
pub const DEFAULT_REGISTRY_CSV: &str = include_str!("../data/cef_registry.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fuel {
    Gas,
    FurnaceOilAndDiesel,
    Solar,
    Coal,
    Hydro,
    Import,
}

impl Fuel {
    /// Fuels reported in an emission account, in report order.
    pub const REPORTED: [Fuel; 5] = [
        Fuel::Gas,
        Fuel::FurnaceOilAndDiesel,
        Fuel::Solar,
        Fuel::Coal,
        Fuel::Hydro,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Fuel::Gas => "gas",
            Fuel::FurnaceOilAndDiesel => "furnace_oil_and_diesel",
            Fuel::Solar => "solar",
            Fuel::Coal => "coal",
            Fuel::Hydro => "hydro",
            Fuel::Import => "import",
        }
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Fuel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gas" => Ok(Fuel::Gas),
            "furnace_oil_and_diesel" => Ok(Fuel::FurnaceOilAndDiesel),
            "solar" => Ok(Fuel::Solar),
            "coal" => Ok(Fuel::Coal),
            "hydro" => Ok(Fuel::Hydro),
            "import" => Ok(Fuel::Import),
            other => Err(Error::Validation(format!("unknown fuel {other:?}"))),
        }
    }
}

/// Emission factors for one fuel, grams CO2 per kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CefEntry {
    pub fuel: Fuel,
    pub min_cef: f64,
    pub max_cef: f64,
    pub avg_cef: f64,
}

impl CefEntry {
    fn validate(&self) -> Result<()> {
        let ordered = self.min_cef <= self.avg_cef && self.avg_cef <= self.max_cef;
        if !(self.min_cef > 0.0 && ordered && self.max_cef.is_finite()) {
            return Err(Error::Validation(format!(
                "{}: factors must be positive with min <= avg <= max",
                self.fuel
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct RegistryRow {
    fuel: String,
    min_cef: f64,
    max_cef: f64,
    avg_cef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CefRegistry {
    entries: BTreeMap<Fuel, CefEntry>,
}

impl Default for CefRegistry {
    fn default() -> Self {
        Self::from_csv(DEFAULT_REGISTRY_CSV).expect("bundled registry is valid")
    }
}

impl CefRegistry {
    /// Reads `fuel,min_cef,max_cef,avg_cef` rows.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for row in reader.deserialize::<RegistryRow>() {
            let row = row?;
            let entry = CefEntry {
                fuel: row.fuel.parse()?,
                min_cef: row.min_cef,
                max_cef: row.max_cef,
                avg_cef: row.avg_cef,
            };
            entry.validate()?;
            if entries.insert(entry.fuel, entry).is_some() {
                return Err(Error::Validation(format!(
                    "fuel {} listed twice",
                    entry.fuel
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fuel,min_cef,max_cef,avg_cef\n");
        for e in self.entries.values() {
            let _ = writeln!(out, "{},{},{},{}", e.fuel, e.min_cef, e.max_cef, e.avg_cef);
        }
        out
    }

    pub fn lookup(&self, fuel: Fuel) -> Result<CefEntry> {
        self.entries
            .get(&fuel)
            .copied()
            .ok_or_else(|| Error::NoFactor(fuel.to_string()))
    }
}

/// CO2 mass in kilotons for `energy_gwh` at `cef` g/kWh.
pub fn co2_mass(energy_gwh: f64, cef: f64) -> Result<f64> {
    if !(energy_gwh >= 0.0) || !energy_gwh.is_finite() {
        return Err(Error::Validation(format!(
            "energy must be finite and non-negative, got {energy_gwh} GWh"
        )));
    }
    Ok(energy_gwh * cef / 1000.0)
}

/// Energy generated per source over one accounting period, GWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMix {
    pub period: String,
    pub gas_gwh: f64,
    pub diesel_gwh: f64,
    pub furnace_oil_gwh: f64,
    pub hydro_gwh: f64,
    pub solar_gwh: f64,
    pub coal_gwh: f64,
    pub import_gwh: f64,
}

impl GenerationMix {
    fn energies(&self) -> [f64; 7] {
        [
            self.gas_gwh,
            self.diesel_gwh,
            self.furnace_oil_gwh,
            self.hydro_gwh,
            self.solar_gwh,
            self.coal_gwh,
            self.import_gwh,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .energies()
            .iter()
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return Err(Error::Validation(format!(
                "period {}: energies must be finite and non-negative",
                self.period
            )));
        }
        Ok(())
    }

    /// Energy attributed to a reported fuel class.
    pub fn energy(&self, fuel: Fuel) -> f64 {
        match fuel {
            Fuel::Gas => self.gas_gwh,
            Fuel::FurnaceOilAndDiesel => self.diesel_gwh + self.furnace_oil_gwh,
            Fuel::Solar => self.solar_gwh,
            Fuel::Coal => self.coal_gwh,
            Fuel::Hydro => self.hydro_gwh,
            Fuel::Import => self.import_gwh,
        }
    }
}

pub const MIX_CSV_HEADER: &str =
    "period,gas_gwh,diesel_gwh,furnace_oil_gwh,hydro_gwh,solar_gwh,coal_gwh,import_gwh";

pub fn parse_mix_csv(text: &str) -> Result<Vec<GenerationMix>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<GenerationMix>() {
        let mix = row?;
        mix.validate()?;
        out.push(mix);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelEmission {
    pub fuel: Fuel,
    pub energy_gwh: f64,
    pub co2_kt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionReport {
    pub period: String,
    pub fuels: Vec<FuelEmission>,
    /// Imported energy, which carries no factor.
    pub import_gwh: f64,
    pub total_kt: f64,
}

impl EmissionReport {
    pub fn co2(&self, fuel: Fuel) -> Option<f64> {
        self.fuels.iter().find(|f| f.fuel == fuel).map(|f| f.co2_kt)
    }
}

pub fn emission_report(mix: &GenerationMix, registry: &CefRegistry) -> Result<EmissionReport> {
    mix.validate()?;
    let fuels = Fuel::REPORTED
        .iter()
        .map(|&fuel| {
            let energy = mix.energy(fuel);
            let cef = registry.lookup(fuel)?.avg_cef;
            Ok(FuelEmission {
                fuel,
                energy_gwh: energy,
                co2_kt: co2_mass(energy, cef)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total_kt = fuels.iter().map(|f| f.co2_kt).sum();
    Ok(EmissionReport {
        period: mix.period.clone(),
        fuels,
        import_gwh: mix.import_gwh,
        total_kt,
    })
}

/// One row per (period, fuel) plus a total row per period.
pub fn reports_to_csv(reports: &[EmissionReport]) -> String {
    let mut out = String::from("period,source,energy_gwh,co2_kt\n");
    for r in reports {
        for f in &r.fuels {
            let _ = writeln!(
                out,
                "{},{},{},{:.3}",
                r.period, f.fuel, f.energy_gwh, f.co2_kt
            );
        }
        let _ = writeln!(out, "{},import,{},", r.period, r.import_gwh);
        let _ = writeln!(out, "{},total,,{:.3}", r.period, r.total_kt);
    }
    out
}

pub fn reports_to_json(reports: &[EmissionReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mix_2020() -> GenerationMix {
        GenerationMix {
            period: "2020".into(),
            gas_gwh: 4033.20833,
            diesel_gwh: 224.1975,
            furnace_oil_gwh: 927.58333,
            hydro_gwh: 58.39,
            solar_gwh: 6.06917,
            coal_gwh: 400.23083,
            import_gwh: 570.13167,
        }
    }

    #[test]
    fn default_registry_factors() {
        let reg = CefRegistry::default();
        assert_eq!(reg.lookup(Fuel::Gas).unwrap().avg_cef, 533.17);
        assert_eq!(reg.lookup(Fuel::Coal).unwrap().avg_cef, 942.33);
        assert_eq!(reg.lookup(Fuel::Hydro).unwrap().avg_cef, 8.22);
        let fo = reg.lookup(Fuel::FurnaceOilAndDiesel).unwrap();
        assert_eq!((fo.min_cef, fo.max_cef, fo.avg_cef), (530.0, 890.0, 773.8));
        assert!(matches!(reg.lookup(Fuel::Import), Err(Error::NoFactor(_))));
    }

    #[test]
    fn registry_round_trip_and_validation() {
        let reg = CefRegistry::default();
        assert_eq!(CefRegistry::from_csv(&reg.to_csv()).unwrap(), reg);
        let bad = "fuel,min_cef,max_cef,avg_cef\ngas,600,1000,533\n";
        assert!(matches!(
            CefRegistry::from_csv(bad),
            Err(Error::Validation(_))
        ));
        let dup = "fuel,min_cef,max_cef,avg_cef\ngas,1,3,2\ngas,1,3,2\n";
        assert!(CefRegistry::from_csv(dup).is_err());
        let unknown = "fuel,min_cef,max_cef,avg_cef\nnuclear,1,3,2\n";
        assert!(CefRegistry::from_csv(unknown).is_err());
    }

    #[test]
    fn co2_mass_examples() {
        assert!((co2_mass(4207.443, 533.17).unwrap() - 2243.282).abs() < 0.01);
        assert_eq!(co2_mass(0.0, 533.17).unwrap(), 0.0);
        assert!((co2_mass(400.23083, 942.33).unwrap() - 377.149).abs() < 0.01);
        assert!(matches!(co2_mass(-1.0, 10.0), Err(Error::Validation(_))));
    }

    #[test]
    fn combined_oil_factor_for_2020() {
        let r = emission_report(&mix_2020(), &CefRegistry::default()).unwrap();
        let expected = (927.58333 + 224.1975) * 773.80 / 1000.0;
        assert_eq!(r.co2(Fuel::FurnaceOilAndDiesel).unwrap(), expected);
        assert!((expected - 891.24).abs() < 0.01);
        assert_eq!(r.import_gwh, 570.13167);
        assert!(r.co2(Fuel::Import).is_none());
    }

    #[test]
    fn zero_mix_gives_zero_report() {
        let zero = GenerationMix {
            period: "none".into(),
            gas_gwh: 0.0,
            diesel_gwh: 0.0,
            furnace_oil_gwh: 0.0,
            hydro_gwh: 0.0,
            solar_gwh: 0.0,
            coal_gwh: 0.0,
            import_gwh: 0.0,
        };
        let r = emission_report(&zero, &CefRegistry::default()).unwrap();
        assert!(r.fuels.iter().all(|f| f.co2_kt == 0.0));
        assert_eq!(r.total_kt, 0.0);
    }

    #[test]
    fn mix_csv_parsing() {
        let text = format!("{MIX_CSV_HEADER}\n2020,4033.20833,224.1975,927.58333,58.39,6.06917,400.23083,570.13167\n");
        let mixes = parse_mix_csv(&text).unwrap();
        assert_eq!(mixes, vec![mix_2020()]);
        let neg = format!("{MIX_CSV_HEADER}\n2020,-1,0,0,0,0,0,0\n");
        assert!(matches!(parse_mix_csv(&neg), Err(Error::Validation(_))));
        let short = format!("{MIX_CSV_HEADER}\n2020,1,2\n");
        assert!(matches!(parse_mix_csv(&short), Err(Error::Csv(_))));
    }

    #[test]
    fn report_exports() {
        let r = emission_report(&mix_2020(), &CefRegistry::default()).unwrap();
        let csv = reports_to_csv(std::slice::from_ref(&r));
        assert!(csv.contains("2020,furnace_oil_and_diesel,"));
        assert!(csv.contains("891.248"));
        assert_eq!(csv.lines().count(), 1 + 5 + 2);
        let json: serde_json::Value =
            serde_json::from_str(&reports_to_json(&[r]).unwrap()).unwrap();
        assert_eq!(json[0]["fuels"][0]["fuel"], "gas");
    }

    proptest! {
        #[test]
        fn co2_mass_is_linear(a in 0.0f64..1e5, b in 0.0f64..1e5, c in 1.0f64..1500.0) {
            let lhs = co2_mass(a + b, c).unwrap();
            let rhs = co2_mass(a, c).unwrap() + co2_mass(b, c).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn report_total_and_monotonicity(
            e in prop::collection::vec(0.0f64..5000.0, 7),
            which in 0usize..7,
            bump in 0.0f64..1000.0,
        ) {
            let mk = |e: &[f64]| GenerationMix {
                period: "p".into(),
                gas_gwh: e[0], diesel_gwh: e[1], furnace_oil_gwh: e[2], hydro_gwh: e[3],
                solar_gwh: e[4], coal_gwh: e[5], import_gwh: e[6],
            };
            let reg = CefRegistry::default();
            let base = emission_report(&mk(&e), &reg).unwrap();
            let parts: f64 = base.fuels.iter().map(|f| f.co2_kt).sum();
            prop_assert!((base.total_kt - parts).abs() < 1e-9);
            prop_assert!(base.fuels.iter().all(|f| f.co2_kt >= 0.0));

            let mut e2 = e.clone();
            e2[which] += bump;
            let more = emission_report(&mk(&e2), &reg).unwrap();
            for (a, b) in base.fuels.iter().zip(&more.fuels) {
                prop_assert!(b.co2_kt >= a.co2_kt);
            }
        }
    }
}
