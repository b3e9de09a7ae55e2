use super::{Dataset, Split};

/// Per-split image count, total objects, count range and resolution range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitStats {
    pub split: Split,
    pub n_images: usize,
    pub total_count: usize,
    pub count_range: Option<(usize, usize)>,
    /// Smallest and largest `(height, width)` by pixel area, ties broken lexicographically.
    pub resolution_range: Option<((usize, usize), (usize, usize))>,
}

pub fn dataset_stats(ds: &Dataset) -> Vec<SplitStats> {
    Split::ALL
        .into_iter()
        .map(|split| {
            let mut s = SplitStats {
                split,
                n_images: 0,
                total_count: 0,
                count_range: None,
                resolution_range: None,
            };
            for e in ds.split(split) {
                let n = e.count();
                s.n_images += 1;
                s.total_count += n;
                s.count_range = Some(match s.count_range {
                    None => (n, n),
                    Some((lo, hi)) => (lo.min(n), hi.max(n)),
                });
                let res = (e.dims.1, e.dims.2);
                let key = |r: (usize, usize)| (r.0 * r.1, r);
                s.resolution_range = Some(match s.resolution_range {
                    None => (res, res),
                    Some((lo, hi)) => (
                        if key(res) < key(lo) { res } else { lo },
                        if key(res) > key(hi) { res } else { hi },
                    ),
                });
            }
            s
        })
        .collect()
}

fn fmt_pair<T>(a: Option<T>, b: Option<T>, f: impl Fn(T) -> String) -> String {
    let show = |x: Option<T>| x.map(&f).unwrap_or_else(|| "-".into());
    format!("({}, {})", show(a), show(b))
}

/// Renders the statistics with one row per dataset and (train, test)
/// pairs in each column. A non-empty validation split gets its own row.
pub fn format_stats_table(name: &str, stats: &[SplitStats]) -> String {
    let get = |split| stats.iter().find(|s| s.split == split);
    let (tr, te) = (get(Split::Train), get(Split::Test));
    let res = |s: Option<&SplitStats>| {
        s.and_then(|s| s.resolution_range).map(|(lo, hi)| {
            if lo == hi {
                format!("({}x{})", lo.0, lo.1)
            } else {
                format!("({}x{}) -- ({}x{})", lo.0, lo.1, hi.0, hi.1)
            }
        })
    };
    let resolution = match (res(tr), res(te)) {
        (Some(a), Some(b)) if a == b => a,
        (a, b) => format!("{} / {}", a.unwrap_or("-".into()), b.unwrap_or("-".into())),
    };
    let mut out = String::new();
    out.push_str("Dataset | #Images (Train, Test) | Resolution | Total Count (Train, Test) | Range of Count (Train, Test)\n");
    out.push_str(&format!(
        "{name} | {} | {resolution} | {} | {}\n",
        fmt_pair(tr.map(|s| s.n_images), te.map(|s| s.n_images), |n| n.to_string()),
        fmt_pair(tr.map(|s| s.total_count), te.map(|s| s.total_count), |n| n.to_string()),
        fmt_pair(
            tr.and_then(|s| s.count_range),
            te.and_then(|s| s.count_range),
            |(lo, hi)| format!("[{lo}, {hi}]")
        ),
    ));
    if let Some(v) = get(Split::Val).filter(|v| v.n_images > 0) {
        out.push_str(&format!(
            "{name} (val) | {} | {} | {} | {}\n",
            v.n_images,
            res(Some(v)).unwrap_or_default(),
            v.total_count,
            v.count_range.map(|(lo, hi)| format!("[{lo}, {hi}]")).unwrap_or_default()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_image, SceneSpec};

    #[test]
    fn fixed_count_set() {
        let spec = SceneSpec {
            height: 40,
            width: 40,
            count_min: 5,
            count_max: 5,
            ..SceneSpec::default()
        };
        let ds = Dataset::from_images((0..10).map(|i| (Split::Train, generate_image(&spec, i, format!("i{i}")).unwrap())));
        let st = dataset_stats(&ds);
        assert_eq!(st[0].n_images, 10);
        assert_eq!(st[0].total_count, 50);
        assert_eq!(st[0].count_range, Some((5, 5)));
        assert_eq!(st[0].resolution_range, Some(((40, 40), (40, 40))));
        let table = format_stats_table("synthetic", &st);
        assert!(table.contains("synthetic | (10, 0) | (40x40) / - | (50, 0) | ([5, 5], -)"), "{table}");
    }

    #[test]
    fn empty_dataset_is_zeros() {
        for s in dataset_stats(&Dataset::default()) {
            assert_eq!((s.n_images, s.total_count), (0, 0));
            assert!(s.count_range.is_none() && s.resolution_range.is_none());
        }
    }
}
