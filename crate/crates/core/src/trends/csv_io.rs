use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::trends::{StageTiming, TrendAxis, TrendSeries};

fn csv_err(what: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Data(format!("{what} CSV: {e}"))
}

/// `group,category,count`, one row per category of each category-axis series.
pub fn write_category_csv<W: Write>(series: &[TrendSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "category", "count"])
        .map_err(csv_err("category"))?;
    for s in series {
        if s.axis != TrendAxis::Category {
            return Err(Error::Data(format!(
                "series for {:?} is not category-wise",
                s.group
            )));
        }
        for (c, name) in s.categories.iter().enumerate() {
            w.write_record([s.group.as_str(), name, &s.category_total(c).to_string()])
                .map_err(csv_err("category"))?;
        }
    }
    w.flush()
        .map_err(|e| Error::Data(format!("category CSV: {e}")))
}

/// `group,year,category,count`, year-major within each series.
pub fn write_time_csv<W: Write>(series: &[TrendSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "year", "category", "count"])
        .map_err(csv_err("time"))?;
    for s in series {
        if s.axis != TrendAxis::Year {
            return Err(Error::Data(format!(
                "series for {:?} is not year-wise",
                s.group
            )));
        }
        for (b, year) in s.bins.iter().enumerate() {
            for (c, name) in s.categories.iter().enumerate() {
                w.write_record([s.group.as_str(), year, name, &s.counts[b][c].to_string()])
                    .map_err(csv_err("time"))?;
            }
        }
    }
    w.flush().map_err(|e| Error::Data(format!("time CSV: {e}")))
}

/// `stage,records,minutes,records_per_min`; the rate is blank when undefined.
pub fn write_timings_csv<W: Write>(timings: &[StageTiming], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "records", "minutes", "records_per_min"])
        .map_err(csv_err("timings"))?;
    for t in timings {
        w.write_record([
            t.stage.clone(),
            t.records.to_string(),
            t.minutes().to_string(),
            t.records_per_minute()
                .map(|r| r.to_string())
                .unwrap_or_default(),
        ])
        .map_err(csv_err("timings"))?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("timings CSV: {e}")))
}

fn parse_count(s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::Data(format!("bad count {s:?}")))
}

fn index_of(list: &mut Vec<String>, value: &str) -> usize {
    match list.iter().position(|x| x == value) {
        Some(i) => i,
        None => {
            list.push(value.to_string());
            list.len() - 1
        }
    }
}

pub fn read_category_csv<R: Read>(input: R) -> Result<Vec<TrendSeries>> {
    let mut out: Vec<TrendSeries> = Vec::new();
    for row in csv::Reader::from_reader(input).records() {
        let row = row.map_err(csv_err("category"))?;
        let (group, category, count) = (&row[0], &row[1], parse_count(&row[2])?);
        let s = match out.iter().position(|s| s.group == group) {
            Some(i) => &mut out[i],
            None => {
                out.push(TrendSeries {
                    group: group.to_string(),
                    axis: TrendAxis::Category,
                    bins: vec!["all".into()],
                    categories: vec![],
                    counts: vec![vec![]],
                });
                out.last_mut().unwrap()
            }
        };
        s.categories.push(category.to_string());
        s.counts[0].push(count);
    }
    Ok(out)
}

pub fn read_time_csv<R: Read>(input: R) -> Result<Vec<TrendSeries>> {
    let mut out: Vec<TrendSeries> = Vec::new();
    for row in csv::Reader::from_reader(input).records() {
        let row = row.map_err(csv_err("time"))?;
        let (group, year, category, count) = (&row[0], &row[1], &row[2], parse_count(&row[3])?);
        let s = match out.iter().position(|s| s.group == group) {
            Some(i) => &mut out[i],
            None => {
                out.push(TrendSeries {
                    group: group.to_string(),
                    axis: TrendAxis::Year,
                    bins: vec![],
                    categories: vec![],
                    counts: vec![],
                });
                out.last_mut().unwrap()
            }
        };
        let b = index_of(&mut s.bins, year);
        let c = index_of(&mut s.categories, category);
        if s.counts.len() <= b {
            s.counts.resize(b + 1, vec![]);
        }
        let row = &mut s.counts[b];
        if row.len() <= c {
            row.resize(c + 1, 0);
        }
        row[c] = count;
    }
    for s in &mut out {
        let width = s.categories.len();
        for row in &mut s.counts {
            row.resize(width, 0);
        }
    }
    Ok(out)
}

/// Parsed timings row: stage, records, minutes, optional rate.
pub type TimingRow = (String, u64, f64, Option<f64>);

pub fn read_timings_csv<R: Read>(input: R) -> Result<Vec<TimingRow>> {
    let float = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Data(format!("bad number {s:?}")))
    };
    csv::Reader::from_reader(input)
        .records()
        .map(|row| {
            let row = row.map_err(csv_err("timings"))?;
            let rate = if row[3].is_empty() {
                None
            } else {
                Some(float(&row[3])?)
            };
            Ok((
                row[0].to_string(),
                parse_count(&row[1])?,
                float(&row[2])?,
                rate,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::trends::record_timing;

    #[test]
    fn category_roundtrip() {
        let s = vec![
            TrendSeries {
                group: "Article Type".into(),
                axis: TrendAxis::Category,
                bins: vec!["all".into()],
                categories: vec!["Clinical".into(), "Experimental, animal".into()],
                counts: vec![vec![3, 0]],
            },
            TrendSeries {
                group: "Other \"quoted\"".into(),
                axis: TrendAxis::Category,
                bins: vec!["all".into()],
                categories: vec!["x".into(), "unassigned".into()],
                counts: vec![vec![1, 9]],
            },
        ];
        let mut buf = Vec::new();
        write_category_csv(&s, &mut buf).unwrap();
        assert_eq!(read_category_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn time_roundtrip() {
        let s = vec![TrendSeries {
            group: "G".into(),
            axis: TrendAxis::Year,
            bins: vec!["2015".into(), "2016".into()],
            categories: vec!["A".into(), "B".into()],
            counts: vec![vec![0, 0], vec![4, 1]],
        }];
        let mut buf = Vec::new();
        write_time_csv(&s, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("group,year,category,count\nG,2015,A,0\n"));
        assert_eq!(read_time_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn wrong_axis_rejected() {
        let s = TrendSeries {
            group: "G".into(),
            axis: TrendAxis::Year,
            bins: vec![],
            categories: vec![],
            counts: vec![],
        };
        assert!(write_category_csv(&[s], Vec::new()).is_err());
    }

    #[test]
    fn timings_roundtrip() {
        let t = vec![
            record_timing("classify:G:abstract", Duration::from_secs(90), 30),
            record_timing("fetch", Duration::ZERO, 0),
        ];
        let mut buf = Vec::new();
        write_timings_csv(&t, &mut buf).unwrap();
        let back = read_timings_csv(buf.as_slice()).unwrap();
        assert_eq!(
            back[0],
            ("classify:G:abstract".to_string(), 30, 1.5, Some(20.0))
        );
        assert_eq!(back[1], ("fetch".to_string(), 0, 0.0, None));
    }
}
