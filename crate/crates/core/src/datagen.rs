//! Seeded dataset generation and CSV persistence.
//!
//! Train and test splits contain seen-class points only. Labels are drawn
//! from the prior renormalized over the seen set, which is statistically
//! equivalent to drawing from the full mixture and discarding unseen draws,
//! but yields exact split sizes (the unseen mass can be as high as 0.94, so
//! rejection would need ~17x oversampling). The two splits use independent
//! generators derived from the scenario seed (`seed` and `seed ^ 1`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dmvn::{sample_one, DiscretizedGaussian, Rng};
use crate::error::{LcError, Result};
use crate::oracle::ScenarioConfig;

/// One generated sample: lattice coordinates plus its class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPoint {
    pub coordinates: Vec<i64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// An ordered, immutable collection of labeled points from one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<LabeledPoint>,
    pub scenario_id: String,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws one label from the seen classes, each weighted by its share of the
/// seen prior mass.
fn draw_seen_label(cumulative: &[(usize, f64)], rng: &mut Rng) -> usize {
    let u = rng.next_f64();
    for &(label, bound) in cumulative {
        if u < bound {
            return label;
        }
    }
    // Floating-point cumsum can close slightly below 1; the final bucket
    // absorbs the remainder.
    cumulative.last().expect("seen set is nonempty").0
}

fn generate_split(
    config: &ScenarioConfig,
    likelihoods: &[(usize, DiscretizedGaussian)],
    size: usize,
    split: Split,
    seed: u64,
) -> Dataset {
    let seen = config.seen_sorted();
    let seen_mass: f64 = seen
        .iter()
        .map(|&l| config.prior_of(l).expect("validated label"))
        .sum();
    let mut bound = 0.0;
    let cumulative: Vec<(usize, f64)> = seen
        .iter()
        .map(|&l| {
            bound += config.prior_of(l).expect("validated label") / seen_mass;
            (l, bound)
        })
        .collect();

    let mut rng = Rng::seeded(seed);
    let points = (0..size)
        .map(|_| {
            let label = draw_seen_label(&cumulative, &mut rng);
            let dist = &likelihoods
                .iter()
                .find(|(l, _)| *l == label)
                .expect("validated label")
                .1;
            LabeledPoint {
                coordinates: sample_one(dist, &mut rng),
                label,
            }
        })
        .collect();
    Dataset {
        points,
        scenario_id: format!("seed{}", config.seed),
        split,
    }
}

/// Generates the train and test splits of a scenario.
///
/// Deterministic: the same config yields byte-identical splits. All emitted
/// labels belong to the seen set.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let likelihoods: Vec<(usize, DiscretizedGaussian)> = config
        .classes
        .iter()
        .map(|c| {
            Ok((
                c.label,
                DiscretizedGaussian::new(c.mean.clone(), c.variances.clone())?,
            ))
        })
        .collect::<Result<_>>()?;
    let train = generate_split(
        config,
        &likelihoods,
        config.train_size,
        Split::Train,
        config.seed,
    );
    let test = generate_split(
        config,
        &likelihoods,
        config.test_size,
        Split::Test,
        config.seed ^ 1,
    );
    Ok((train, test))
}

/// Writes a dataset as CSV: header `x1,..,xD,label`, one decimal-integer row
/// per point, `\n` terminated.
pub fn write_dataset_to<W: Write>(dataset: &Dataset, out: &mut W) -> Result<()> {
    let dim = dataset
        .points
        .first()
        .map(|p| p.coordinates.len())
        .unwrap_or(2);
    for d in 0..dim {
        if d > 0 {
            out.write_all(b",")?;
        }
        write!(out, "x{}", d + 1)?;
    }
    out.write_all(b",label\n")?;
    for point in &dataset.points {
        for c in &point.coordinates {
            write!(out, "{c},")?;
        }
        writeln!(out, "{}", point.label)?;
    }
    Ok(())
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset_to(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Reads a dataset back. Structural problems (wrong column count,
/// non-integer coordinate, a label outside `allowed_labels`) are parse
/// errors naming the 1-based line number. The file format carries no
/// metadata, so identity and split are supplied by the caller.
pub fn read_dataset(
    path: &Path,
    allowed_labels: &[usize],
    scenario_id: &str,
    split: Split,
) -> Result<Dataset> {
    let parse_err = |line: usize, msg: String| LcError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))??;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 || columns.last() != Some(&"label") {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let dim = columns.len() - 1;
    for (d, name) in columns[..dim].iter().enumerate() {
        if *name != format!("x{}", d + 1) {
            return Err(parse_err(1, format!("unexpected header {header:?}")));
        }
    }

    let mut points = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(parse_err(
                line_no,
                format!("expected {} columns, got {}", dim + 1, fields.len()),
            ));
        }
        let coordinates = fields[..dim]
            .iter()
            .map(|f| {
                f.parse::<i64>().map_err(|_| {
                    parse_err(line_no, format!("non-integer coordinate {f:?}"))
                })
            })
            .collect::<std::result::Result<Vec<i64>, LcError>>()?;
        let label = fields[dim]
            .parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("non-integer label {:?}", fields[dim])))?;
        if !allowed_labels.contains(&label) {
            return Err(parse_err(line_no, format!("unknown label {label}")));
        }
        points.push(LabeledPoint { coordinates, label });
    }
    Ok(Dataset {
        points,
        scenario_id: scenario_id.to_string(),
        split,
    })
}
