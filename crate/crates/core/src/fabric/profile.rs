use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::digest::fnv1a64;
use crate::time::SimTime;

/// Sizes are binary throughout: 1 KB = 1024 B, 1 MB = 1024 KB.
pub const KB: u64 = 1024;
pub const MB: u64 = 1024 * KB;
pub const GB: u64 = 1024 * MB;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputDestination {
    /// Data comes back to the RB in the output sandbox.
    Sandbox,
    /// Data goes to the CE's close SE and is registered in the catalogue.
    CloseSe,
}

impl FromStr for OutputDestination {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sandbox" => Ok(OutputDestination::Sandbox),
            "se" | "close_se" => Ok(OutputDestination::CloseSe),
            other => Err(format!("unknown output destination `{other}` (sandbox or se)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadProfile {
    pub name: String,
    pub per_event_cpu_seconds_at_1ghz: f64,
    pub output_bytes_per_event: u64,
    pub monitor_every_events: u64,
    pub output: OutputDestination,
    /// Data file name; `{dataset}`, `{index}` and `{seed}` are substituted.
    pub output_name: String,
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.per_event_cpu_seconds_at_1ghz.is_finite() && self.per_event_cpu_seconds_at_1ghz > 0.0) {
            return Err(format!("profile {}: cpu per event must be > 0", self.name));
        }
        if self.output_bytes_per_event == 0 {
            return Err(format!("profile {}: output bytes per event must be > 0", self.name));
        }
        if self.monitor_every_events == 0 {
            return Err(format!("profile {}: monitor interval must be > 0", self.name));
        }
        Ok(())
    }

    /// Closed-form CPU time on a `cpu_mhz` node:
    /// events x per-event seconds at 1 GHz x (1000 / cpu_mhz).
    pub fn cpu_seconds(&self, events: u64, cpu_mhz: u32) -> f64 {
        events as f64 * self.per_event_cpu_seconds_at_1ghz * (1000.0 / f64::from(cpu_mhz))
    }

    /// [`cpu_seconds`](Self::cpu_seconds) rounded to the millisecond.
    pub fn runtime(&self, events: u64, cpu_mhz: u32) -> SimTime {
        SimTime::from_secs_f64(self.cpu_seconds(events, cpu_mhz))
    }

    pub fn output_bytes(&self, events: u64) -> u64 {
        events * self.output_bytes_per_event
    }

    pub fn output_file_name(&self, dataset: &str, index: u64, seed: i64) -> String {
        self.output_name
            .replace("{dataset}", dataset)
            .replace("{index}", &index.to_string())
            .replace("{seed}", &seed.to_string())
    }
}

/// Content digest of an output file. Depends only on what the job computed,
/// never on where it ran.
pub fn output_checksum(profile: &str, dataset: &str, index: u64, events: u64, role: &str) -> u64 {
    fnv1a64([
        profile.as_bytes(),
        dataset.as_bytes(),
        index.to_string().as_bytes(),
        events.to_string().as_bytes(),
        role.as_bytes(),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    profiles: BTreeMap<String, WorkloadProfile>,
}

impl Default for ProfileTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ProfileTable {
    /// atlsim: 150 s/event. cmkin: 0.5 s and 50 KB per event.
    /// cmsim: 350 s and 1.8 MB per event. All at 1 GHz.
    ///
    /// The atlsim output size (180 KB/event) is a placeholder and can be
    /// overridden from the topology file.
    pub fn builtin() -> Self {
        let mut profiles = BTreeMap::new();
        for p in [
            WorkloadProfile {
                name: "atlsim".into(),
                per_event_cpu_seconds_at_1ghz: 150.0,
                output_bytes_per_event: 180 * KB,
                monitor_every_events: 10,
                output: OutputDestination::Sandbox,
                output_name: "{dataset}_{index}.zebra".into(),
            },
            WorkloadProfile {
                name: "cmkin".into(),
                per_event_cpu_seconds_at_1ghz: 0.5,
                output_bytes_per_event: 50 * KB,
                monitor_every_events: 10,
                output: OutputDestination::CloseSe,
                output_name: "{dataset}_{index}.ntpl".into(),
            },
            WorkloadProfile {
                name: "cmsim".into(),
                per_event_cpu_seconds_at_1ghz: 350.0,
                // 1.8 MB does not divide into whole bytes; round to nearest.
                output_bytes_per_event: (1.8 * MB as f64).round() as u64,
                monitor_every_events: 10,
                output: OutputDestination::CloseSe,
                output_name: "{dataset}_{index}_{seed}.fz".into(),
            },
        ] {
            profiles.insert(p.name.clone(), p);
        }
        ProfileTable { profiles }
    }

    pub fn get(&self, name: &str) -> Option<&WorkloadProfile> {
        self.profiles.get(name)
    }

    pub fn insert(&mut self, p: WorkloadProfile) -> Result<(), String> {
        p.validate()?;
        self.profiles.insert(p.name.clone(), p);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &WorkloadProfile> {
        self.profiles.values()
    }
}

impl fmt::Display for WorkloadProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} cpu={}s/event@1GHz out={}B/event monitor={}",
            self.name,
            self.per_event_cpu_seconds_at_1ghz,
            self.output_bytes_per_event,
            self.monitor_every_events
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_runtimes() {
        let t = ProfileTable::builtin();
        assert_eq!(t.get("atlsim").unwrap().runtime(100, 1000), SimTime::from_secs(15_000));
        assert_eq!(t.get("cmsim").unwrap().runtime(250, 2000), SimTime::from_secs(43_750));
        assert_eq!(t.get("cmkin").unwrap().runtime(250, 1000), SimTime::from_secs(125));
        // 250 x 0.5 x (1000 / 2000) = 62.5 s
        assert_eq!(t.get("cmkin").unwrap().runtime(250, 2000), SimTime::from_millis(62_500));
    }

    #[test]
    fn builtin_output_sizes() {
        let t = ProfileTable::builtin();
        assert_eq!(t.get("cmkin").unwrap().output_bytes(250), 12_800_000);
        assert_eq!(t.get("cmsim").unwrap().output_bytes_per_event, 1_887_437);
    }

    #[test]
    fn output_names() {
        let t = ProfileTable::builtin();
        assert_eq!(t.get("cmkin").unwrap().output_file_name("demo", 22, 2000), "demo_22.ntpl");
        assert_eq!(t.get("cmsim").unwrap().output_file_name("demo", 22, 2021), "demo_22_2021.fz");
    }

    #[test]
    fn checksum_ignores_location_inputs() {
        let a = output_checksum("atlsim", "dc1", 0, 100, "data");
        assert_eq!(a, output_checksum("atlsim", "dc1", 0, 100, "data"));
        assert_ne!(a, output_checksum("atlsim", "dc1", 0, 101, "data"));
        assert_ne!(a, output_checksum("atlsim", "dc1", 1, 100, "data"));
    }

    #[test]
    fn invalid_profiles() {
        let mut p = ProfileTable::builtin().get("cmkin").unwrap().clone();
        p.monitor_every_events = 0;
        assert!(p.validate().is_err());
        p.monitor_every_events = 1;
        p.per_event_cpu_seconds_at_1ghz = 0.0;
        assert!(ProfileTable::builtin().insert(p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn runtime_matches_closed_form(per_event in 0.001f64..1000.0, events in 1u64..5000, mhz in 100u32..5000) {
                let p = WorkloadProfile {
                    name: "custom".into(),
                    per_event_cpu_seconds_at_1ghz: per_event,
                    output_bytes_per_event: 1,
                    monitor_every_events: 1,
                    output: OutputDestination::Sandbox,
                    output_name: "x".into(),
                };
                let exact = events as f64 * per_event * 1000.0 / f64::from(mhz);
                let got = p.runtime(events, mhz).as_secs_f64();
                prop_assert!((got - exact).abs() <= 0.0005 + exact * 1e-12);
            }
        }
    }
}
