//! Problem data, seeded instance generation and the portable instance-set file.
//!
//! Draw order is part of the file contract: a set regenerated from the same
//! `(seed, recipe)` by any implementation of [`SplitMix64`] must be identical.
//!
//! * knapsack: instance-major, then item-major, weight drawn before value;
//!   each entry is `floor(u * scale) + 1`.
//! * job shop: instance-major, then job-major; for each job the machine
//!   permutation is drawn first (Fisher-Yates over `0..n_machines`), then one
//!   duration in `[1, 99]` per operation in route order.

use std::fs;
use std::path::Path;

use serde::ser::SerializeTuple;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const JSP_MIN_DURATION: u64 = 1;
pub const JSP_MAX_DURATION: u64 = 99;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KpInstance {
    pub id: String,
    pub capacity: u64,
    pub scale: u64,
    pub weights: Vec<u64>,
    pub values: Vec<u64>,
}

impl KpInstance {
    pub fn new(
        id: impl Into<String>,
        weights: Vec<u64>,
        values: Vec<u64>,
        capacity: u64,
        scale: u64,
    ) -> Result<Self> {
        let inst = Self {
            id: id.into(),
            capacity,
            scale,
            weights,
            values,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidArgument("knapsack needs at least one item".into()));
        }
        if self.weights.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights but {} values",
                self.weights.len(),
                self.values.len()
            )));
        }
        if self.scale == 0 {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A selection over the items of one [`KpInstance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KpSolution {
    pub selected: Vec<bool>,
    pub objective: u64,
    pub weight_used: u64,
}

impl KpSolution {
    /// Builds a solution from a selection, recomputing both sums.
    pub fn from_selection(inst: &KpInstance, selected: Vec<bool>) -> Self {
        let (objective, weight_used) = selected
            .iter()
            .zip(inst.values.iter().zip(&inst.weights))
            .filter(|(s, _)| **s)
            .fold((0, 0), |(v, w), (_, (vi, wi))| (v + vi, w + wi));
        Self {
            selected,
            objective,
            weight_used,
        }
    }

    pub fn empty(inst: &KpInstance) -> Self {
        Self::from_selection(inst, vec![false; inst.len()])
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.then_some(i))
            .collect()
    }
}

/// One step of a job route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Operation {
    pub machine: usize,
    pub duration: u64,
}

impl Serialize for Operation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&self.machine)?;
        t.serialize_element(&self.duration)?;
        t.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JspInstance {
    pub id: String,
    pub n_jobs: usize,
    pub n_machines: usize,
    pub routes: Vec<Vec<Operation>>,
}

impl JspInstance {
    pub fn new(
        id: impl Into<String>,
        n_machines: usize,
        routes: Vec<Vec<(usize, u64)>>,
    ) -> Result<Self> {
        let routes: Vec<Vec<Operation>> = routes
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|(machine, duration)| Operation { machine, duration })
                    .collect()
            })
            .collect();
        let inst = Self {
            id: id.into(),
            n_jobs: routes.len(),
            n_machines,
            routes,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_jobs == 0 || self.n_machines == 0 {
            return Err(Error::InvalidArgument(
                "job shop needs at least one job and one machine".into(),
            ));
        }
        if self.routes.len() != self.n_jobs {
            return Err(Error::InvalidArgument(format!(
                "n_jobs is {} but {} routes given",
                self.n_jobs,
                self.routes.len()
            )));
        }
        for (j, route) in self.routes.iter().enumerate() {
            if route.is_empty() {
                return Err(Error::InvalidArgument(format!("job {j} has an empty route")));
            }
            for (k, op) in route.iter().enumerate() {
                if op.machine >= self.n_machines {
                    return Err(Error::InvalidArgument(format!(
                        "job {j} op {k}: machine {} out of range 0..{}",
                        op.machine, self.n_machines
                    )));
                }
                if op.duration == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "job {j} op {k}: duration must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_operations(&self) -> usize {
        self.routes.iter().map(Vec::len).sum()
    }

    pub fn total_work(&self) -> u64 {
        self.routes.iter().flatten().map(|o| o.duration).sum()
    }

    pub fn max_duration(&self) -> u64 {
        self.routes.iter().flatten().map(|o| o.duration).max().unwrap_or(0)
    }

    /// Offset of each job's first operation in the flat operation index.
    pub fn job_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.n_jobs);
        let mut acc = 0;
        for r in &self.routes {
            offsets.push(acc);
            acc += r.len();
        }
        offsets
    }
}

/// Start times for every operation, indexed `[job][position]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub starts: Vec<Vec<u64>>,
    pub makespan: u64,
}

impl Schedule {
    /// Builds a schedule and derives its makespan from the instance durations.
    pub fn from_starts(inst: &JspInstance, starts: Vec<Vec<u64>>) -> Self {
        let makespan = inst
            .routes
            .iter()
            .zip(&starts)
            .flat_map(|(r, s)| r.iter().zip(s).map(|(o, s)| s + o.duration))
            .max()
            .unwrap_or(0);
        Self { starts, makespan }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KpRecipe {
    pub n_items: usize,
    pub count: usize,
    pub capacity: u64,
    pub scale: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JspRecipe {
    pub n_jobs: usize,
    pub n_machines: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Kp,
    Jsp,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Kp => "kp",
            ProblemKind::Jsp => "jsp",
        }
    }
}

/// A homogeneous, reproducible batch of instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceSet {
    Kp {
        seed: u64,
        recipe: KpRecipe,
        instances: Vec<KpInstance>,
    },
    Jsp {
        seed: u64,
        recipe: JspRecipe,
        instances: Vec<JspInstance>,
    },
}

impl InstanceSet {
    pub fn kind(&self) -> ProblemKind {
        match self {
            InstanceSet::Kp { .. } => ProblemKind::Kp,
            InstanceSet::Jsp { .. } => ProblemKind::Jsp,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            InstanceSet::Kp { seed, .. } | InstanceSet::Jsp { seed, .. } => *seed,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            InstanceSet::Kp { instances, .. } => instances.len(),
            InstanceSet::Jsp { instances, .. } => instances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Label used in report tables: item count for KP, `JxM` for JSP.
    pub fn size_label(&self) -> String {
        match self {
            InstanceSet::Kp { recipe, .. } => recipe.n_items.to_string(),
            InstanceSet::Jsp { recipe, .. } => format!("{}x{}", recipe.n_jobs, recipe.n_machines),
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a, R: Serialize, I: Serialize> {
            kind: &'a str,
            seed: u64,
            recipe: &'a R,
            instances: &'a [I],
        }
        let kind = self.kind().as_str();
        let mut out = match self {
            InstanceSet::Kp {
                seed,
                recipe,
                instances,
            } => serde_json::to_string(&Doc {
                kind,
                seed: *seed,
                recipe,
                instances,
            }),
            InstanceSet::Jsp {
                seed,
                recipe,
                instances,
            } => serde_json::to_string(&Doc {
                kind,
                seed: *seed,
                recipe,
                instances,
            }),
        }
        .expect("instance sets always serialize");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::format("<document>", e.to_string()))?;
        let root = as_object(&doc, "<document>")?;
        let kind = get(root, "kind")?
            .as_str()
            .ok_or_else(|| Error::format("kind", "expected a string"))?;
        let seed = get_u64(root, "seed")?;
        let recipe = as_object(get(root, "recipe")?, "recipe")?;
        let list = get(root, "instances")?
            .as_array()
            .ok_or_else(|| Error::format("instances", "expected an array"))?;
        let set = match kind {
            "kp" => {
                let recipe = KpRecipe {
                    n_items: get_usize(recipe, "n_items")?,
                    count: get_usize(recipe, "count")?,
                    capacity: get_u64(recipe, "capacity")?,
                    scale: get_u64(recipe, "scale")?,
                };
                let instances = list
                    .iter()
                    .map(kp_from_value)
                    .collect::<Result<Vec<_>>>()?;
                InstanceSet::Kp {
                    seed,
                    recipe,
                    instances,
                }
            }
            "jsp" => {
                let recipe = JspRecipe {
                    n_jobs: get_usize(recipe, "n_jobs")?,
                    n_machines: get_usize(recipe, "n_machines")?,
                    count: get_usize(recipe, "count")?,
                };
                let instances = list
                    .iter()
                    .map(jsp_from_value)
                    .collect::<Result<Vec<_>>>()?;
                InstanceSet::Jsp {
                    seed,
                    recipe,
                    instances,
                }
            }
            other => return Err(Error::format("kind", format!("unknown kind {other:?}"))),
        };
        let count = match &set {
            InstanceSet::Kp { recipe, .. } => recipe.count,
            InstanceSet::Jsp { recipe, .. } => recipe.count,
        };
        if count != set.len() {
            return Err(Error::format(
                "count",
                format!("recipe says {count} instances, file holds {}", set.len()),
            ));
        }
        Ok(set)
    }
}

fn as_object<'a>(v: &'a Value, key: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::format(key, "expected an object"))
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::format(key, "missing key"))
}

fn get_u64(obj: &Map<String, Value>, key: &str) -> Result<u64> {
    get(obj, key)?
        .as_u64()
        .ok_or_else(|| Error::format(key, "expected a non-negative integer"))
}

fn get_usize(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    get_u64(obj, key).map(|v| v as usize)
}

fn get_u64_array(obj: &Map<String, Value>, key: &str) -> Result<Vec<u64>> {
    get(obj, key)?
        .as_array()
        .ok_or_else(|| Error::format(key, "expected an array"))?
        .iter()
        .map(|v| {
            v.as_u64()
                .ok_or_else(|| Error::format(key, "expected non-negative integers"))
        })
        .collect()
}

fn kp_from_value(v: &Value) -> Result<KpInstance> {
    let obj = as_object(v, "instances")?;
    let id = get(obj, "id")?
        .as_str()
        .ok_or_else(|| Error::format("id", "expected a string"))?;
    let inst = KpInstance {
        id: id.to_owned(),
        capacity: get_u64(obj, "capacity")?,
        scale: get_u64(obj, "scale")?,
        weights: get_u64_array(obj, "weights")?,
        values: get_u64_array(obj, "values")?,
    };
    inst.validate()
        .map_err(|e| Error::format("instances", e.to_string()))?;
    Ok(inst)
}

fn jsp_from_value(v: &Value) -> Result<JspInstance> {
    let obj = as_object(v, "instances")?;
    let id = get(obj, "id")?
        .as_str()
        .ok_or_else(|| Error::format("id", "expected a string"))?;
    let routes = get(obj, "routes")?
        .as_array()
        .ok_or_else(|| Error::format("routes", "expected an array"))?
        .iter()
        .map(|route| {
            route
                .as_array()
                .ok_or_else(|| Error::format("routes", "expected an array per job"))?
                .iter()
                .map(|pair| match pair.as_array().map(Vec::as_slice) {
                    Some([m, p]) => match (m.as_u64(), p.as_u64()) {
                        (Some(m), Some(p)) => Ok(Operation {
                            machine: m as usize,
                            duration: p,
                        }),
                        _ => Err(Error::format("routes", "expected integer pairs")),
                    },
                    _ => Err(Error::format("routes", "expected [machine, duration] pairs")),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = JspInstance {
        id: id.to_owned(),
        n_jobs: get_usize(obj, "n_jobs")?,
        n_machines: get_usize(obj, "n_machines")?,
        routes,
    };
    inst.validate()
        .map_err(|e| Error::format("instances", e.to_string()))?;
    Ok(inst)
}

pub fn save_set(set: &InstanceSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, set.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_set(path: impl AsRef<Path>) -> Result<InstanceSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    InstanceSet::from_json(&text)
}

pub fn gen_kp_set(
    n_items: usize,
    count: usize,
    capacity: u64,
    scale: u64,
    seed: u64,
) -> Result<InstanceSet> {
    if n_items == 0 || count == 0 {
        return Err(Error::InvalidArgument(
            "n_items and count must both be positive".into(),
        ));
    }
    if scale == 0 {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let instances = (0..count)
        .map(|i| {
            let mut weights = Vec::with_capacity(n_items);
            let mut values = Vec::with_capacity(n_items);
            for _ in 0..n_items {
                weights.push(scaled_draw(&mut rng, scale));
                values.push(scaled_draw(&mut rng, scale));
            }
            KpInstance {
                id: format!("kp{n_items}-{i}"),
                capacity,
                scale,
                weights,
                values,
            }
        })
        .collect();
    Ok(InstanceSet::Kp {
        seed,
        recipe: KpRecipe {
            n_items,
            count,
            capacity,
            scale,
        },
        instances,
    })
}

fn scaled_draw(rng: &mut SplitMix64, scale: u64) -> u64 {
    (rng.next_f64() * scale as f64).floor() as u64 + 1
}

pub fn gen_jsp_set(n_jobs: usize, n_machines: usize, count: usize, seed: u64) -> Result<InstanceSet> {
    if n_jobs == 0 || n_machines == 0 || count == 0 {
        return Err(Error::InvalidArgument(
            "n_jobs, n_machines and count must all be positive".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let instances = (0..count)
        .map(|i| {
            let routes = (0..n_jobs)
                .map(|_| {
                    let mut machines: Vec<usize> = (0..n_machines).collect();
                    rng.shuffle(&mut machines);
                    machines
                        .into_iter()
                        .map(|machine| Operation {
                            machine,
                            duration: rng.int_in(JSP_MIN_DURATION, JSP_MAX_DURATION),
                        })
                        .collect()
                })
                .collect();
            JspInstance {
                id: format!("jsp{n_jobs}x{n_machines}-{i}"),
                n_jobs,
                n_machines,
                routes,
            }
        })
        .collect();
    Ok(InstanceSet::Jsp {
        seed,
        recipe: JspRecipe {
            n_jobs,
            n_machines,
            count,
        },
        instances,
    })
}

/// Parses the alternating machine/duration Taillard layout.
///
/// The first non-blank line holds `n_jobs n_machines`; each following line is
/// one job. Machine indices are taken as 0-based when any index is 0, and as
/// 1-based when every index lies in `1..=n_machines`. Lines starting with `#`
/// are comments.
pub fn parse_taillard(text: &str) -> Result<JspInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let dims = parse_numbers(header_line, header)?;
    let [n_jobs, n_machines] = dims[..] else {
        return Err(Error::Parse {
            line: header_line,
            message: format!("header needs 2 numbers, found {}", dims.len()),
        });
    };
    let (n_jobs, n_machines) = (n_jobs as usize, n_machines as usize);
    if n_jobs == 0 || n_machines == 0 {
        return Err(Error::Parse {
            line: header_line,
            message: "job and machine counts must be positive".into(),
        });
    }

    let mut raw: Vec<(usize, Vec<(u64, u64)>)> = Vec::with_capacity(n_jobs);
    for (line_no, line) in lines {
        if raw.len() == n_jobs {
            return Err(Error::Parse {
                line: line_no,
                message: format!("header declares {n_jobs} jobs but more job lines follow"),
            });
        }
        let nums = parse_numbers(line_no, line)?;
        if nums.is_empty() || nums.len() % 2 != 0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected machine/duration pairs, found {} numbers",
                    nums.len()
                ),
            });
        }
        raw.push((line_no, nums.chunks(2).map(|c| (c[0], c[1])).collect()));
    }
    if raw.len() < n_jobs {
        return Err(Error::Parse {
            line: raw.last().map_or(header_line, |(l, _)| *l),
            message: format!("header declares {n_jobs} jobs, found {}", raw.len()),
        });
    }

    let one_based = raw
        .iter()
        .flat_map(|(_, ops)| ops.iter())
        .all(|&(m, _)| m >= 1 && m as usize <= n_machines);
    let offset = u64::from(one_based);

    let mut routes = Vec::with_capacity(n_jobs);
    for (line_no, ops) in raw {
        let mut route = Vec::with_capacity(ops.len());
        for (m, p) in ops {
            let machine = (m - offset) as usize;
            if machine >= n_machines {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("machine index {m} out of range for {n_machines} machines"),
                });
            }
            if p == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "durations must be positive".into(),
                });
            }
            route.push(Operation {
                machine,
                duration: p,
            });
        }
        routes.push(route);
    }
    Ok(JspInstance {
        id: "taillard".into(),
        n_jobs,
        n_machines,
        routes,
    })
}

fn parse_numbers(line_no: usize, line: &str) -> Result<Vec<u64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric token {tok:?}"),
            })
        })
        .collect()
}

/// The four-item knapsack used throughout the docs and tests.
pub fn toy_knapsack() -> KpInstance {
    KpInstance {
        id: "toy".into(),
        capacity: 7,
        scale: 1,
        weights: vec![2, 3, 4, 5],
        values: vec![3, 4, 5, 8],
    }
}

/// The three-job, three-machine illustration (cut/paint/test style routes).
pub fn toy_job_shop() -> JspInstance {
    parse_taillard("3 3\n0 3 1 2 2 2\n1 2 2 1 0 4\n2 3 0 2 1 3")
        .map(|mut i| {
            i.id = "toy3x3".into();
            i
        })
        .expect("toy instance parses")
}
