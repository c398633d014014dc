//! Dual-branch routing: instances with an overlapping partner go to the
//! collaborative branch, the rest pass straight through.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::bev_iou;
use crate::scenario::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    pub lambda: f64,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self { lambda: 0.1 }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<()> {
        // Values just above 1 are allowed so callers can force everything single.
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Pairwise BEV IoU with a zeroed diagonal.
pub fn build_iou_matrix(table: &[Instance]) -> Array2<f64> {
    let n = table.len();
    let mut m = Array2::zeros((n, n));
    for k in 0..n {
        for v in k + 1..n {
            let iou = bev_iou(&table[k].bbox.bev, &table[v].bbox.bev);
            m[[k, v]] = iou;
            m[[v, k]] = iou;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoutedSets {
    pub single: Vec<Instance>,
    pub coop: Vec<Instance>,
    /// For each coop instance, indices (into `coop`) of partners with IoU >= lambda.
    pub partners: Vec<Vec<usize>>,
}

/// Routing decision expressed as indices into the input table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RouteIndices {
    pub single: Vec<usize>,
    pub coop: Vec<usize>,
    /// For each entry of `coop`, positions (within `coop`) of its partners.
    pub partners: Vec<Vec<usize>>,
}

/// Instance `k` is single iff `max_{v != k} M[k][v] < lambda`; everything else is coop.
/// Indices come back in table order.
pub fn route_indices(table: &[Instance], cfg: &RoutingConfig) -> RouteIndices {
    let m = build_iou_matrix(table);
    let n = table.len();
    let partner_lists: Vec<Vec<usize>> = (0..n)
        .map(|k| (0..n).filter(|&v| v != k && m[[k, v]] >= cfg.lambda).collect())
        .collect();
    let mut out = RouteIndices::default();
    let mut coop_pos = vec![usize::MAX; n];
    for (k, partners) in partner_lists.iter().enumerate() {
        if partners.is_empty() {
            out.single.push(k);
        } else {
            coop_pos[k] = out.coop.len();
            out.coop.push(k);
        }
    }
    out.partners = out
        .coop
        .iter()
        .map(|&k| partner_lists[k].iter().map(|&v| coop_pos[v]).collect())
        .collect();
    out
}

/// Split `table` into the single and coop branches, preserving relative order.
pub fn route(table: &[Instance], cfg: &RoutingConfig) -> RoutedSets {
    let idx = route_indices(table, cfg);
    RoutedSets {
        single: idx.single.iter().map(|&k| table[k].clone()).collect(),
        coop: idx.coop.iter().map(|&k| table[k].clone()).collect(),
        partners: idx.partners,
    }
}
