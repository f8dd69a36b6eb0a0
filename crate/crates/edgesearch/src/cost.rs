//! Analytical FLOPs/params/latency estimation for decoded backbones.
//!
//! MAC and parameter counts use exact integer convolution arithmetic.
//! Latency follows a roofline law per layer:
//! `max(compute_time, weight_bytes / bandwidth) + per_layer_overhead`,
//! where depthwise convolutions run at a configurable fraction of dense
//! throughput.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search_space::{ArchRow, Architecture, LayerKind};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("layer {index}: spatial dimensions must be positive, got {h}x{w}")]
    EmptyInput { index: usize, h: u32, w: u32 },
    #[error("architecture row 0 must be the Conv2D stem")]
    MissingStem,
    #[error("hardware profile invalid: {0}")]
    BadProfile(String),
}

/// Throughput, bandwidth, and overhead parameters of a target device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    /// Dense-convolution throughput, multiply-accumulates per second.
    pub dense_macs_per_sec: f64,
    /// Fraction of dense throughput reached by depthwise convolutions.
    pub depthwise_efficiency: f64,
    /// Weight-fetch memory bandwidth, bytes per second.
    pub weight_bytes_per_sec: f64,
    /// Fixed dispatch overhead added to every layer, seconds.
    pub per_layer_overhead_s: f64,
    /// Storage width of one weight, bytes.
    pub bytes_per_weight: f64,
}

impl Default for HardwareProfile {
    /// Edge-accelerator-class stand-in; configurable, not ground truth.
    fn default() -> Self {
        HardwareProfile {
            dense_macs_per_sec: 4e12,
            depthwise_efficiency: 1.0 / 3.0,
            weight_bytes_per_sec: 25e9,
            per_layer_overhead_s: 20e-6,
            bytes_per_weight: 1.0,
        }
    }
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<(), CostError> {
        if !(self.dense_macs_per_sec > 0.0) {
            return Err(CostError::BadProfile("dense_macs_per_sec must be > 0".into()));
        }
        if !(self.depthwise_efficiency > 0.0 && self.depthwise_efficiency <= 1.0) {
            return Err(CostError::BadProfile(
                "depthwise_efficiency must be in (0, 1]".into(),
            ));
        }
        if !(self.weight_bytes_per_sec > 0.0) {
            return Err(CostError::BadProfile("weight_bytes_per_sec must be > 0".into()));
        }
        if !(self.per_layer_overhead_s >= 0.0) {
            return Err(CostError::BadProfile("per_layer_overhead_s must be >= 0".into()));
        }
        if !(self.bytes_per_weight > 0.0) {
            return Err(CostError::BadProfile("bytes_per_weight must be > 0".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let profile: HardwareProfile = toml::from_str(text).map_err(|e| e.to_string())?;
        profile.validate().map_err(|e| e.to_string())?;
        Ok(profile)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("profile serializes")
    }
}

/// Exact per-layer counts plus the modeled latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub index: usize,
    pub layer: LayerKind,
    pub macs: u64,
    pub flops: u64,
    pub params: u64,
    pub latency_s: f64,
    pub output_hw: (u32, u32),
    pub output_channels: u32,
}

/// Per-layer costs and their exact totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub per_layer: Vec<LayerCost>,
    pub total_macs: u64,
    pub total_flops: u64,
    pub total_params: u64,
    pub total_latency_s: f64,
}

fn ceil_div(a: u32, b: u32) -> u32 {
    a.div_ceil(b)
}

/// One sub-convolution: MACs, params, and whether it runs at depthwise
/// throughput.
struct SubConv {
    macs: u64,
    params: u64,
    depthwise: bool,
}

fn sub_convs(row: &ArchRow, cin: u64, in_hw: (u32, u32), out_hw: (u32, u32)) -> Vec<SubConv> {
    let k2 = (row.kernel as u64) * (row.kernel as u64);
    let cout = row.filters as u64;
    let (hi, wi) = (in_hw.0 as u64, in_hw.1 as u64);
    let (ho, wo) = (out_hw.0 as u64, out_hw.1 as u64);
    match row.layer {
        LayerKind::Conv2d => vec![SubConv {
            macs: ho * wo * k2 * cin * cout,
            params: k2 * cin * cout,
            depthwise: false,
        }],
        LayerKind::Ibn => {
            let e = row.expansion.expect("IBN rows carry an expansion") as u64;
            let cmid = cin * e;
            vec![
                // 1x1 expansion at input resolution
                SubConv {
                    macs: hi * wi * cin * cmid,
                    params: cin * cmid,
                    depthwise: false,
                },
                // kxk depthwise, stride applied here
                SubConv {
                    macs: ho * wo * k2 * cmid,
                    params: k2 * cmid,
                    depthwise: true,
                },
                // 1x1 projection
                SubConv {
                    macs: ho * wo * cmid * cout,
                    params: cmid * cout,
                    depthwise: false,
                },
            ]
        }
        LayerKind::FusedIbn => {
            let e = row.expansion.expect("FusedIBN rows carry an expansion") as u64;
            let cmid = cin * e;
            vec![
                // fused kxk dense conv replacing expansion + depthwise
                SubConv {
                    macs: ho * wo * k2 * cin * cmid,
                    params: k2 * cin * cmid,
                    depthwise: false,
                },
                SubConv {
                    macs: ho * wo * cmid * cout,
                    params: cmid * cout,
                    depthwise: false,
                },
            ]
        }
    }
}

/// Costs one layer given its input channel count and spatial size.
/// Inputs are SAME-padded, so output dims are `ceil(in / stride)`.
pub fn layer_cost(
    row: &ArchRow,
    in_channels: u32,
    in_hw: (u32, u32),
    profile: &HardwareProfile,
) -> Result<LayerCost, CostError> {
    if in_hw.0 == 0 || in_hw.1 == 0 {
        return Err(CostError::EmptyInput {
            index: row.index,
            h: in_hw.0,
            w: in_hw.1,
        });
    }
    let out_hw = (ceil_div(in_hw.0, row.stride), ceil_div(in_hw.1, row.stride));
    let subs = sub_convs(row, in_channels as u64, in_hw, out_hw);
    let macs: u64 = subs.iter().map(|s| s.macs).sum();
    let params: u64 = subs.iter().map(|s| s.params).sum();
    let compute_s: f64 = subs
        .iter()
        .map(|s| {
            let throughput = if s.depthwise {
                profile.dense_macs_per_sec * profile.depthwise_efficiency
            } else {
                profile.dense_macs_per_sec
            };
            s.macs as f64 / throughput
        })
        .sum();
    let weight_s = params as f64 * profile.bytes_per_weight / profile.weight_bytes_per_sec;
    let latency_s = compute_s.max(weight_s) + profile.per_layer_overhead_s;
    Ok(LayerCost {
        index: row.index,
        layer: row.layer,
        macs,
        flops: 2 * macs,
        params,
        latency_s,
        output_hw: out_hw,
        output_channels: row.filters,
    })
}

/// Number of input image channels feeding the stem.
pub const INPUT_CHANNELS: u32 = 3;

/// Chains layer costs through the whole architecture, propagating channel
/// counts and spatial dimensions.
pub fn architecture_cost(
    arch: &Architecture,
    input_hw: (u32, u32),
    profile: &HardwareProfile,
) -> Result<CostReport, CostError> {
    profile.validate()?;
    match arch.rows.first() {
        Some(row) if row.layer == LayerKind::Conv2d && row.index == 0 => {}
        _ => return Err(CostError::MissingStem),
    }
    let mut per_layer = Vec::with_capacity(arch.rows.len());
    let mut channels = INPUT_CHANNELS;
    let mut hw = input_hw;
    for row in &arch.rows {
        let cost = layer_cost(row, channels, hw, profile)?;
        channels = cost.output_channels;
        hw = cost.output_hw;
        per_layer.push(cost);
    }
    Ok(CostReport {
        total_macs: per_layer.iter().map(|l| l.macs).sum(),
        total_flops: per_layer.iter().map(|l| l.flops).sum(),
        total_params: per_layer.iter().map(|l| l.params).sum(),
        total_latency_s: per_layer.iter().map(|l| l.latency_s).sum(),
        per_layer,
    })
}

impl CostReport {
    /// Structured-text export: one record per layer plus a totals record.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("index,layer,macs,flops,params,latency_s,out_h,out_w,out_channels\n");
        for l in &self.per_layer {
            out.push_str(&format!(
                "{},{},{},{},{},{:e},{},{},{}\n",
                l.index,
                l.layer.name(),
                l.macs,
                l.flops,
                l.params,
                l.latency_s,
                l.output_hw.0,
                l.output_hw.1,
                l.output_channels
            ));
        }
        out.push_str(&format!(
            "total,,{},{},{},{:e},,,\n",
            self.total_macs, self.total_flops, self.total_params, self.total_latency_s
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::search_space::{BackboneSkeleton, ChannelMultiplier, LayerChoice};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fused_row() -> ArchRow {
        ArchRow {
            index: 1,
            layer: LayerKind::FusedIbn,
            stride: 1,
            kernel: 3,
            filters: 24,
            expansion: Some(6),
        }
    }

    fn ibn_row() -> ArchRow {
        ArchRow {
            layer: LayerKind::Ibn,
            ..fused_row()
        }
    }

    /// depthwise_efficiency 1, effectively infinite bandwidth, zero overhead
    fn degenerate_profile() -> HardwareProfile {
        HardwareProfile {
            dense_macs_per_sec: 1e12,
            depthwise_efficiency: 1.0,
            weight_bytes_per_sec: 1e30,
            per_layer_overhead_s: 0.0,
            bytes_per_weight: 1.0,
        }
    }

    #[test]
    fn fused_ibn_fixture_counts() {
        let cost = layer_cost(&fused_row(), 16, (32, 32), &HardwareProfile::default()).unwrap();
        assert_eq!(cost.macs, 16_515_072);
        assert_eq!(cost.flops, 2 * 16_515_072);
        assert_eq!(cost.params, 16_128);
    }

    #[test]
    fn ibn_fixture_counts() {
        let cost = layer_cost(&ibn_row(), 16, (32, 32), &HardwareProfile::default()).unwrap();
        assert_eq!(cost.macs, 4_816_896);
        assert_eq!(cost.params, 4_704);
    }

    #[test]
    fn degenerate_profile_latency_is_macs_over_throughput() {
        let profile = degenerate_profile();
        for row in [fused_row(), ibn_row()] {
            let cost = layer_cost(&row, 16, (32, 32), &profile).unwrap();
            assert_abs_diff_eq!(
                cost.latency_s,
                cost.macs as f64 / profile.dense_macs_per_sec,
                epsilon = 1e-18
            );
        }
    }

    #[test]
    fn depthwise_efficiency_sign_flip_at_threshold() {
        // For this configuration IBN compute is
        //   (expand + project) / dense + depthwise / (dense * eff)
        // and FusedIBN compute is (fused + project) / dense, so IBN becomes
        // slower exactly when eff < 884736 / 12582912 = 0.0703125.
        let threshold = 884_736.0 / 12_582_912.0;
        for (eff, ibn_slower) in [(threshold * 0.98, true), (threshold * 1.02, false)] {
            let profile = HardwareProfile {
                depthwise_efficiency: eff,
                ..degenerate_profile()
            };
            let ibn = layer_cost(&ibn_row(), 16, (32, 32), &profile).unwrap();
            let fused = layer_cost(&fused_row(), 16, (32, 32), &profile).unwrap();
            assert!(ibn.macs < fused.macs);
            assert_eq!(ibn.latency_s > fused.latency_s, ibn_slower, "eff={eff}");
        }
    }

    #[test]
    fn fused_params_dominate_ibn_across_domain() {
        // identical (Cin, Cout, k, e): holds for every Cin >= 2
        for cin in [2u32, 8, 16, 112, 320] {
            for k in [3u32, 5] {
                for e in [3u32, 6] {
                    for cout in [8u32, 24, 480] {
                        let base = ArchRow {
                            index: 1,
                            layer: LayerKind::Ibn,
                            stride: 1,
                            kernel: k,
                            filters: cout,
                            expansion: Some(e),
                        };
                        let fused = ArchRow {
                            layer: LayerKind::FusedIbn,
                            ..base.clone()
                        };
                        let p = HardwareProfile::default();
                        let ibn = layer_cost(&base, cin, (16, 16), &p).unwrap();
                        let fus = layer_cost(&fused, cin, (16, 16), &p).unwrap();
                        assert!(fus.params >= ibn.params);
                    }
                }
            }
        }
    }

    #[test]
    fn spatial_dims_propagate_with_ceil() {
        let arch = fixtures::multitask_architecture();
        let report = architecture_cost(&arch, (255, 255), &HardwareProfile::default()).unwrap();
        // strides 2,1,2,1,2,1,2,... downsample 255 -> 128 -> 64 -> 32 -> 16 -> 8
        assert_eq!(report.per_layer[0].output_hw, (128, 128));
        assert_eq!(report.per_layer.last().unwrap().output_hw, (8, 8));
    }

    #[test]
    fn totals_equal_sums() {
        let arch = fixtures::multitask_architecture();
        let report = architecture_cost(&arch, (256, 256), &HardwareProfile::default()).unwrap();
        assert_eq!(
            report.total_macs,
            report.per_layer.iter().map(|l| l.macs).sum::<u64>()
        );
        assert_eq!(
            report.total_params,
            report.per_layer.iter().map(|l| l.params).sum::<u64>()
        );
        assert_eq!(report.total_flops, 2 * report.total_macs);
    }

    #[test]
    fn stem_only_architecture() {
        let arch = Architecture {
            rows: vec![fixtures::multitask_architecture().rows[0].clone()],
        };
        let report = architecture_cost(&arch, (256, 256), &HardwareProfile::default()).unwrap();
        assert_eq!(report.per_layer.len(), 1);
        // 128 * 128 * 9 * 3 * 32
        assert_eq!(report.total_macs, 14_155_776);
        assert_eq!(report.total_params, 864);
    }

    #[test]
    fn zero_input_rejected() {
        let arch = fixtures::multitask_architecture();
        assert!(matches!(
            architecture_cost(&arch, (0, 256), &HardwareProfile::default()),
            Err(CostError::EmptyInput { .. })
        ));
    }

    #[test]
    fn multiplier_increase_is_monotone() {
        // raising any single block's channel multiplier never lowers totals
        let skel = BackboneSkeleton::full();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let profile = HardwareProfile::default();
        let options = ChannelMultiplier::OPTIONS;
        for _ in 0..100 {
            let genome = skel.random_genome(&mut rng);
            let base = architecture_cost(&skel.decode(&genome), (64, 64), &profile).unwrap();
            for block in 0..skel.blocks() {
                let cur = genome.choices()[block].multiplier;
                let pos = options.iter().position(|m| *m == cur).unwrap();
                if pos + 1 >= options.len() {
                    continue;
                }
                let mut choices = genome.choices().to_vec();
                choices[block] = LayerChoice {
                    multiplier: options[pos + 1],
                    ..choices[block]
                };
                let bumped = architecture_cost(
                    &skel.decode(&crate::search_space::Genome::new(choices)),
                    (64, 64),
                    &profile,
                )
                .unwrap();
                assert!(bumped.total_macs >= base.total_macs);
                assert!(bumped.total_params >= base.total_params);
            }
        }
    }

    #[test]
    fn profile_toml_round_trip_and_validation() {
        let p = HardwareProfile::default();
        let back = HardwareProfile::from_toml(&p.to_toml()).unwrap();
        assert_eq!(back, p);
        assert!(HardwareProfile::from_toml("dense_macs_per_sec = -1.0").is_err());
    }
}
