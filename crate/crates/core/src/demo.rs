//! Seeded demo datasets.
//!
//! The public benchmark files (AD, BC, BM, CC, CR, GM) are not redistributed;
//! `understudy` builds same-shaped stand-ins (column mix and minority
//! fraction) so the full pipeline can run offline at desk scale, and the toy
//! builders provide small, strongly learnable tasks for tests.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ColumnMeta, DataTable, Row, TableSchema, Value};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Shape of one benchmark understudy: desk-scale row count, feature mix,
/// and minority percentage.
#[derive(Debug, Clone, Copy)]
pub struct UnderstudyShape {
    pub id: &'static str,
    pub rows: usize,
    pub categorical: usize,
    pub continuous: usize,
    pub minority_pct: f64,
}

pub const UNDERSTUDIES: [UnderstudyShape; 6] = [
    UnderstudyShape { id: "AD", rows: 2000, categorical: 8, continuous: 6, minority_pct: 23.9 },
    UnderstudyShape { id: "BC", rows: 1000, categorical: 5, continuous: 6, minority_pct: 20.3 },
    UnderstudyShape { id: "BM", rows: 1000, categorical: 7, continuous: 6, minority_pct: 11.7 },
    UnderstudyShape { id: "CC", rows: 2500, categorical: 9, continuous: 14, minority_pct: 22.12 },
    UnderstudyShape { id: "CR", rows: 1000, categorical: 17, continuous: 3, minority_pct: 30.0 },
    UnderstudyShape { id: "GM", rows: 2500, categorical: 4, continuous: 6, minority_pct: 6.68 },
];

pub fn understudy_shape(id: &str) -> Option<UnderstudyShape> {
    UNDERSTUDIES.iter().find(|s| s.id == id).copied()
}

/// Build the understudy for a benchmark id ("AD", "BC", ...).
pub fn understudy(id: &str, seed: u64) -> Result<DataTable> {
    let shape = understudy_shape(id)
        .ok_or_else(|| Error::invalid(format!("unknown demo dataset id '{id}'")))?;
    let minority_rows = (shape.rows as f64 * shape.minority_pct / 100.0).round() as usize;
    let mut columns = Vec::new();
    // Column 0 is the binary target; remaining categorical columns cycle
    // through small arities.
    columns.push(ColumnMeta::categorical("target", &["neg", "pos"]));
    let mut recipes = Vec::new();
    let mut rng = derive_rng(seed, "understudy-recipe", fnv(id));
    for c in 0..shape.categorical.saturating_sub(1) {
        let arity = 2 + c % 4;
        let names: Vec<String> = (0..arity).map(|v| format!("v{v}")).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        columns.push(ColumnMeta::categorical(format!("c{c}"), &name_refs));
        recipes.push(ColumnRecipe::Categorical(class_conditional_weights(
            arity, &mut rng,
        )));
    }
    for k in 0..shape.continuous {
        let lo = -(10.0 + k as f64);
        let hi = 10.0 + 2.0 * k as f64;
        columns.push(ColumnMeta::continuous(format!("n{k}"), lo, hi));
        let spread = (hi - lo) / 10.0;
        let base = lo + (hi - lo) * (0.3 + 0.1 * rng.random::<f64>());
        let shift = (hi - lo) * (0.15 + 0.15 * rng.random::<f64>());
        recipes.push(ColumnRecipe::Continuous {
            mean: [base, base + shift],
            sd: spread,
            lo,
            hi,
        });
    }
    let schema = TableSchema::new(columns, "target")?;
    sample_rows(schema, recipes, shape.rows, minority_rows, seed)
}

enum ColumnRecipe {
    Categorical([Vec<f64>; 2]),
    Continuous { mean: [f64; 2], sd: f64, lo: f64, hi: f64 },
}

fn class_conditional_weights(arity: usize, rng: &mut impl Rng) -> [Vec<f64>; 2] {
    let draw = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        let raw: Vec<f64> = (0..arity).map(|_| 0.2 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    };
    [draw(rng), draw(rng)]
}

fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn sample_rows(
    schema: TableSchema,
    recipes: Vec<ColumnRecipe>,
    rows: usize,
    minority_rows: usize,
    seed: u64,
) -> Result<DataTable> {
    let mut rng = derive_rng(seed, "understudy-rows", 0);
    let mut out: Vec<Row> = Vec::with_capacity(rows);
    for r in 0..rows {
        let label = usize::from(r < minority_rows);
        let mut row: Row = Vec::with_capacity(schema.columns.len());
        row.push(Value::Cat(label));
        for recipe in &recipes {
            match recipe {
                ColumnRecipe::Categorical(weights) => {
                    row.push(Value::Cat(sample_categorical(&weights[label], &mut rng)));
                }
                ColumnRecipe::Continuous { mean, sd, lo, hi } => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    row.push(Value::Cont((mean[label] + sd * z).clamp(*lo, *hi)));
                }
            }
        }
        out.push(row);
    }
    // Interleave classes so prefixes of the table are not single-class.
    let mut shuffled_rng = derive_rng(seed, "understudy-shuffle", 0);
    use rand::seq::SliceRandom;
    out.shuffle(&mut shuffled_rng);
    DataTable::new(schema, out)
}

fn fnv(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Small census-style task with strong label/feature dependence: two
/// categorical and two continuous predictors. Learnable by a boosted tree
/// at high balanced accuracy, which makes it a good probe for how much
/// signal a synthesizer preserves.
pub fn ad_like(rows: usize, minority_pct: f64, seed: u64) -> Result<DataTable> {
    let schema = TableSchema::new(
        vec![
            ColumnMeta::categorical("income", &["low", "high"]),
            ColumnMeta::categorical("occupation", &["svc", "adm", "prof", "exec"]),
            ColumnMeta::categorical("marital", &["single", "divorced", "married"]),
            ColumnMeta::continuous("age", 17.0, 90.0),
            ColumnMeta::continuous("hours", 1.0, 99.0),
        ],
        "income",
    )?;
    let recipes = vec![
        ColumnRecipe::Categorical([
            vec![0.40, 0.30, 0.20, 0.10],
            vec![0.05, 0.15, 0.30, 0.50],
        ]),
        ColumnRecipe::Categorical([vec![0.55, 0.30, 0.15], vec![0.15, 0.20, 0.65]]),
        ColumnRecipe::Continuous { mean: [31.0, 46.0], sd: 7.0, lo: 17.0, hi: 90.0 },
        ColumnRecipe::Continuous { mean: [37.0, 49.0], sd: 5.0, lo: 1.0, hi: 99.0 },
    ];
    let minority_rows = (rows as f64 * minority_pct / 100.0).round() as usize;
    sample_rows(schema, recipes, rows, minority_rows, seed)
}

/// One continuous column drawn from two well-separated clusters tied to the
/// label. Used for autoencoder reconstruction and GMM fitting checks.
pub fn two_cluster(rows: usize, seed: u64) -> Result<DataTable> {
    let schema = TableSchema::new(
        vec![
            ColumnMeta::categorical("label", &["a", "b"]),
            ColumnMeta::continuous("x", -5.0, 15.0),
        ],
        "label",
    )?;
    let recipes = vec![ColumnRecipe::Continuous {
        mean: [0.0, 10.0],
        sd: 0.4,
        lo: -5.0,
        hi: 15.0,
    }];
    sample_rows(schema, recipes, rows, rows / 2, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::minority_fraction;

    #[test]
    fn understudies_match_declared_shapes() {
        for shape in UNDERSTUDIES {
            let t = understudy(shape.id, 0).unwrap();
            assert_eq!(t.n_rows(), shape.rows, "{}", shape.id);
            assert_eq!(
                t.n_columns(),
                shape.categorical + shape.continuous,
                "{}",
                shape.id
            );
            assert!(
                (minority_fraction(&t) - shape.minority_pct).abs() < 0.05,
                "{}: {}",
                shape.id,
                minority_fraction(&t)
            );
        }
    }

    #[test]
    fn cr_understudy_is_table_one_sized() {
        let t = understudy("CR", 3).unwrap();
        assert_eq!(t.n_rows(), 1000);
        assert_eq!(t.n_columns(), 20);
        assert_eq!(minority_fraction(&t), 30.0);
    }

    #[test]
    fn ad_understudy_minority() {
        let t = understudy("AD", 3).unwrap();
        assert!((minority_fraction(&t) - 23.9) < 0.05);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = understudy("BC", 5).unwrap();
        let b = understudy("BC", 5).unwrap();
        assert_eq!(a.rows(), b.rows());
        let c = understudy("BC", 6).unwrap();
        assert_ne!(a.rows(), c.rows());
    }

    #[test]
    fn ad_like_fraction_exact() {
        let t = ad_like(1000, 30.0, 1).unwrap();
        assert_eq!(minority_fraction(&t), 30.0);
    }
}
