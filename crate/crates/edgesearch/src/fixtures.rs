//! Reference fixtures: two published backbone architectures with their
//! genome encodings, and a two-task benchmark table used to exercise the
//! relative-delta metrics.

use crate::metrics::Direction;
use crate::search_space::{
    ArchRow, Architecture, ChannelMultiplier, Expansion, Genome, Kernel, LayerChoice, LayerKind,
    LayerType,
};

fn choice(lt: LayerType, k: Kernel, m: ChannelMultiplier, e: Expansion) -> LayerChoice {
    LayerChoice {
        layer_type: lt,
        kernel: k,
        multiplier: m,
        expansion: e,
    }
}

use ChannelMultiplier::{X0_50, X0_75, X1_00, X1_50};
use Expansion::{E3, E6};
use Kernel::{K3, K5};
use LayerType::{FusedIbn as F, Ibn as I};

/// Genome of the backbone found by the multi-task search (CityScapes,
/// segmentation + depth). Block 1's expansion gene is arbitrary; decode
/// forces it to 1.
pub fn multitask_genome() -> Genome {
    Genome::new(vec![
        choice(F, K3, X1_00, E3), // 1 (expansion decoded as 1)
        choice(I, K5, X1_50, E6), // 2
        choice(F, K5, X1_00, E6), // 3
        choice(F, K3, X1_50, E6), // 4
        choice(F, K3, X1_00, E3), // 5
        choice(F, K5, X1_50, E3), // 6
        choice(I, K3, X1_50, E3), // 7
        choice(F, K5, X1_00, E6), // 8
        choice(F, K5, X1_50, E6), // 9
        choice(F, K5, X0_75, E3), // 10
        choice(F, K5, X0_75, E6), // 11
        choice(F, K5, X1_50, E3), // 12
        choice(F, K3, X0_50, E3), // 13
        choice(F, K3, X0_50, E6), // 14
        choice(F, K3, X0_50, E3), // 15
        choice(F, K5, X0_50, E6), // 16
    ])
}

/// Decoded form of [`multitask_genome`], cell for cell.
pub fn multitask_architecture() -> Architecture {
    arch(&[
        (0, LayerKind::Conv2d, 2, 3, 32, None),
        (1, LayerKind::FusedIbn, 1, 3, 16, Some(1)),
        (2, LayerKind::Ibn, 2, 5, 36, Some(6)),
        (3, LayerKind::FusedIbn, 1, 5, 24, Some(6)),
        (4, LayerKind::FusedIbn, 2, 3, 60, Some(6)),
        (5, LayerKind::FusedIbn, 1, 3, 40, Some(3)),
        (6, LayerKind::FusedIbn, 2, 5, 120, Some(3)),
        (7, LayerKind::Ibn, 1, 3, 120, Some(3)),
        (8, LayerKind::FusedIbn, 1, 5, 80, Some(6)),
        (9, LayerKind::FusedIbn, 1, 5, 168, Some(6)),
        (10, LayerKind::FusedIbn, 1, 5, 84, Some(3)),
        (11, LayerKind::FusedIbn, 1, 5, 84, Some(6)),
        (12, LayerKind::FusedIbn, 2, 5, 288, Some(3)),
        (13, LayerKind::FusedIbn, 1, 3, 96, Some(3)),
        (14, LayerKind::FusedIbn, 1, 3, 96, Some(6)),
        (15, LayerKind::FusedIbn, 1, 3, 96, Some(3)),
        (16, LayerKind::FusedIbn, 1, 5, 160, Some(6)),
    ])
}

/// Genome of the backbone found by the single-task depth search.
pub fn single_task_depth_genome() -> Genome {
    Genome::new(vec![
        choice(F, K3, X1_50, E3), // 1 (expansion decoded as 1)
        choice(I, K3, X1_50, E6), // 2
        choice(I, K3, X1_50, E6), // 3
        choice(F, K5, X1_00, E6), // 4
        choice(F, K5, X1_00, E3), // 5
        choice(I, K3, X1_00, E6), // 6
        choice(F, K3, X1_50, E3), // 7
        choice(F, K3, X1_00, E6), // 8
        choice(F, K3, X1_50, E3), // 9
        choice(F, K3, X0_50, E6), // 10
        choice(F, K3, X1_00, E3), // 11
        choice(F, K5, X1_00, E6), // 12
        choice(F, K3, X1_00, E6), // 13
        choice(I, K5, X1_00, E3), // 14
        choice(I, K5, X1_00, E3), // 15
        choice(F, K5, X0_75, E3), // 16
    ])
}

/// Decoded form of [`single_task_depth_genome`], cell for cell.
pub fn single_task_depth_architecture() -> Architecture {
    arch(&[
        (0, LayerKind::Conv2d, 2, 3, 32, None),
        (1, LayerKind::FusedIbn, 1, 3, 24, Some(1)),
        (2, LayerKind::Ibn, 2, 3, 36, Some(6)),
        (3, LayerKind::Ibn, 1, 3, 36, Some(6)),
        (4, LayerKind::FusedIbn, 2, 5, 40, Some(6)),
        (5, LayerKind::FusedIbn, 1, 5, 40, Some(3)),
        (6, LayerKind::Ibn, 2, 3, 80, Some(6)),
        (7, LayerKind::FusedIbn, 1, 3, 120, Some(3)),
        (8, LayerKind::FusedIbn, 1, 3, 80, Some(6)),
        (9, LayerKind::FusedIbn, 1, 3, 168, Some(3)),
        (10, LayerKind::FusedIbn, 1, 3, 56, Some(6)),
        (11, LayerKind::FusedIbn, 1, 3, 112, Some(3)),
        (12, LayerKind::FusedIbn, 2, 5, 192, Some(6)),
        (13, LayerKind::FusedIbn, 1, 3, 192, Some(6)),
        (14, LayerKind::Ibn, 1, 5, 192, Some(3)),
        (15, LayerKind::Ibn, 1, 5, 192, Some(3)),
        (16, LayerKind::FusedIbn, 1, 5, 240, Some(3)),
    ])
}

#[allow(clippy::type_complexity)] // literal fixture rows
fn arch(rows: &[(usize, LayerKind, u32, u32, u32, Option<u32>)]) -> Architecture {
    Architecture {
        rows: rows
            .iter()
            .map(|&(index, layer, stride, kernel, filters, expansion)| ArchRow {
                index,
                layer,
                stride,
                kernel,
                filters,
                expansion,
            })
            .collect(),
    }
}

/// One row of the two-task CityScapes benchmark table: raw metric values
/// and the published delta columns recomputed by the metric tests.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkRow {
    pub method: &'static str,
    /// (mIoU, PAcc, AbsE, RelE) raw values.
    pub raw: [f64; 4],
    /// Published (dMiou, dPacc, dAbse, dRele, dT_seg, dT_depth, dT).
    pub published: [f64; 7],
}

/// Metric layout shared by the benchmark rows: two segmentation metrics
/// (higher better) then two depth error metrics (lower better).
pub const BENCHMARK_DIRECTIONS: [Direction; 4] = [
    Direction::HigherBetter,
    Direction::HigherBetter,
    Direction::LowerBetter,
    Direction::LowerBetter,
];

/// Single-task baseline for the large-model block.
pub const LARGE_BASELINE: [f64; 4] = [40.20, 74.70, 0.0170, 0.330];

/// Single-task baseline for the edge-model block.
pub const EDGE_BASELINE: [f64; 4] = [40.04, 88.68, 0.0157, 0.340];

/// Large-model block rows, scored against [`LARGE_BASELINE`].
pub const LARGE_ROWS: [BenchmarkRow; 7] = [
    BenchmarkRow {
        method: "MT baseline",
        raw: [37.70, 73.80, 0.0180, 0.340],
        published: [-6.2, -1.2, -5.9, -3.0, -3.7, -4.5, -4.1],
    },
    BenchmarkRow {
        method: "Cross-Stitch",
        raw: [40.30, 74.30, 0.0150, 0.300],
        published: [0.2, -0.5, 11.8, 9.1, -0.1, 10.4, 5.1],
    },
    BenchmarkRow {
        method: "Sluice",
        raw: [39.80, 74.20, 0.0160, 0.310],
        published: [-1.0, -0.7, 5.9, 6.1, -0.8, 6.0, 2.6],
    },
    BenchmarkRow {
        method: "NDDR-CNN",
        raw: [41.50, 74.20, 0.0170, 0.310],
        published: [3.2, -0.7, 0.0, 6.1, 1.3, 3.0, 2.2],
    },
    BenchmarkRow {
        method: "MTAN",
        raw: [40.80, 74.30, 0.0150, 0.320],
        published: [1.5, -0.5, 11.8, 3.0, 0.5, 7.4, 3.9],
    },
    BenchmarkRow {
        method: "DEN",
        raw: [38.00, 74.20, 0.0170, 0.370],
        published: [-5.5, -0.7, 0.0, -12.1, -3.1, -6.1, -4.6],
    },
    BenchmarkRow {
        method: "AdaShare",
        raw: [41.50, 74.90, 0.0160, 0.330],
        published: [3.2, 0.3, 5.9, 0.0, 1.8, 2.9, 2.3],
    },
];

/// Edge-model block rows, scored against [`EDGE_BASELINE`].
pub const EDGE_ROWS: [BenchmarkRow; 3] = [
    BenchmarkRow {
        method: "MT edge",
        raw: [38.64, 88.49, 0.0171, 0.354],
        published: [-3.5, -0.2, -8.5, -4.1, -1.9, -6.3, -4.1],
    },
    BenchmarkRow {
        method: "multi-task search",
        raw: [46.52, 90.61, 0.0143, 0.316],
        published: [16.2, 2.2, 8.9, 6.9, 9.2, 7.9, 8.5],
    },
    BenchmarkRow {
        method: "multi-task search + joint depth loss",
        raw: [46.11, 90.47, 0.0143, 0.281],
        published: [15.1, 2.0, 9.1, 17.4, 8.6, 13.3, 10.9],
    },
];
