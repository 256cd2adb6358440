//! Readers and writers for PLINK .bed/.bim/.fam, ADMIXTURE .Q/.P tables,
//! plain TSV genotype dumps, matrix dumps, labels, and run manifests.
//!
//! The .bed reader streams SNP blocks so wide matrices never need a second
//! dense copy in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::config::SNP_BLOCK;
use crate::error::{Error, Result};
use crate::model::{validate_genotypes, GenotypeMatrix, IngestReport, MissingPolicy, MISSING};

pub const MANIFEST_FORMAT_VERSION: &str = "1";

const BED_MAGIC: [u8; 3] = [0x6C, 0x1B, 0x01];

/// One .fam line per individual; returns individual ids (second column).
pub fn read_fam(path: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let _fid = it.next();
        match it.next() {
            Some(iid) => ids.push(iid.to_string()),
            None => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    detail: "fam line has fewer than 2 fields".into(),
                })
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::Ingestion("fam file lists no individuals".into()));
    }
    Ok(ids)
}

/// One .bim line per SNP; returns SNP ids (second column).
pub fn read_bim(path: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let _chrom = it.next();
        match it.next() {
            Some(id) => ids.push(id.to_string()),
            None => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    detail: "bim line has fewer than 2 fields".into(),
                })
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::Ingestion("bim file lists no SNPs".into()));
    }
    Ok(ids)
}

/// Streaming SNP-major .bed reader yielding blocks of up to `SNP_BLOCK` SNP
/// rows with raw values (missing entries as [`MISSING`]).
pub struct BedBlockReader {
    reader: BufReader<File>,
    n: usize,
    m: usize,
    next_snp: usize,
}

impl BedBlockReader {
    pub fn open(bed: &Path, m: usize, n: usize) -> Result<Self> {
        let file = File::open(bed)?;
        let bytes_per_snp = (n + 3) / 4;
        let expect = 3 + m as u64 * bytes_per_snp as u64;
        let actual = file.metadata()?.len();
        if actual != expect {
            return Err(Error::BedHeader(format!(
                "bed file is {} bytes, expected {} for {} SNPs x {} individuals",
                actual, expect, m, n
            )));
        }
        let mut reader = BufReader::new(file);
        let mut magic = [0u8; 3];
        reader.read_exact(&mut magic)?;
        if magic[..2] != BED_MAGIC[..2] {
            return Err(Error::BedHeader(format!(
                "bad magic bytes {:#04x} {:#04x}",
                magic[0], magic[1]
            )));
        }
        if magic[2] != BED_MAGIC[2] {
            return Err(Error::BedHeader(format!(
                "mode byte {:#04x}: only SNP-major (0x01) is supported",
                magic[2]
            )));
        }
        Ok(Self {
            reader,
            n,
            m,
            next_snp: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn read_block(&mut self) -> Result<Option<Array2<u8>>> {
        if self.next_snp >= self.m {
            return Ok(None);
        }
        let rows = SNP_BLOCK.min(self.m - self.next_snp);
        let bytes_per_snp = (self.n + 3) / 4;
        let mut buf = vec![0u8; rows * bytes_per_snp];
        self.reader.read_exact(&mut buf)?;
        let mut block = Array2::<u8>::zeros((rows, self.n));
        for s in 0..rows {
            let row_bytes = &buf[s * bytes_per_snp..(s + 1) * bytes_per_snp];
            for i in 0..self.n {
                let code = (row_bytes[i / 4] >> ((i % 4) * 2)) & 0b11;
                block[(s, i)] = match code {
                    0b00 => 2,
                    0b10 => 1,
                    0b11 => 0,
                    _ => MISSING,
                };
            }
        }
        self.next_snp += rows;
        Ok(Some(block))
    }
}

impl Iterator for BedBlockReader {
    type Item = Result<Array2<u8>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_block().transpose()
    }
}

/// Load a .bed/.bim/.fam trio into a validated genotype matrix.
pub fn read_bed(bed: &Path, bim: &Path, fam: &Path, policy: MissingPolicy) -> Result<IngestReport> {
    let snp_ids = read_bim(bim)?;
    let sample_ids = read_fam(fam)?;
    let (m, n) = (snp_ids.len(), sample_ids.len());
    let reader = BedBlockReader::open(bed, m, n)?;
    let mut raw = Array2::<u8>::zeros((m, n));
    let mut row = 0;
    for block in reader {
        let block = block?;
        let rows = block.nrows();
        raw.slice_mut(ndarray::s![row..row + rows, ..]).assign(&block);
        row += rows;
    }
    let report = validate_genotypes(raw.view(), policy)?;
    let kept_snp_ids = if report.dropped_snps == 0 {
        snp_ids
    } else {
        // recompute which rows survived: drop_snp removes rows with MISSING
        raw.rows()
            .into_iter()
            .zip(snp_ids)
            .filter(|(r, _)| r.iter().all(|&g| g != MISSING))
            .map(|(_, id)| id)
            .collect()
    };
    let genotypes = GenotypeMatrix::with_ids(
        report.genotypes.data().to_owned(),
        Some(kept_snp_ids),
        Some(sample_ids),
    )?;
    Ok(IngestReport {
        genotypes,
        dropped_snps: report.dropped_snps,
    })
}

/// Write a genotype matrix as a .bed/.bim/.fam trio. SNP and sample ids fall
/// back to snp{s}/ind{i} when absent; bim/fam metadata beyond ids is filler.
pub fn write_bed(g: &GenotypeMatrix, bed: &Path, bim: &Path, fam: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(bed)?);
    w.write_all(&BED_MAGIC)?;
    let n = g.n();
    let bytes_per_snp = (n + 3) / 4;
    for row in g.data().rows() {
        let mut buf = vec![0u8; bytes_per_snp];
        for (i, &gval) in row.iter().enumerate() {
            let code: u8 = match gval {
                2 => 0b00,
                1 => 0b10,
                0 => 0b11,
                other => {
                    return Err(Error::InvalidGenotype {
                        snp: 0,
                        individual: i,
                        value: other,
                    })
                }
            };
            buf[i / 4] |= code << ((i % 4) * 2);
        }
        w.write_all(&buf)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(bim)?);
    for s in 0..g.m() {
        let id = g
            .snp_ids()
            .map(|ids| ids[s].clone())
            .unwrap_or_else(|| format!("snp{}", s));
        writeln!(w, "1\t{}\t0\t{}\tA\tC", id, s + 1)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(fam)?);
    for i in 0..n {
        let id = g
            .sample_ids()
            .map(|ids| ids[i].clone())
            .unwrap_or_else(|| format!("ind{}", i));
        writeln!(w, "{id} {id} 0 0 0 -9")?;
    }
    w.flush()?;
    Ok(())
}

fn read_float_table(path: &Path) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            row.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                detail: format!("non-numeric token '{}'", tok),
            })?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    detail: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Ingestion(format!("{}: no rows", path.display())));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((r, c), flat)
        .map_err(|e| Error::Ingestion(format!("{}: {}", path.display(), e)))
}

/// ADMIXTURE .Q table: n rows of k' proportions, returned transposed (k' x n).
/// Entries outside [0,1] or row sums away from 1 are warned about, not
/// rejected: unconstrained estimates are legitimate input.
pub fn read_q(path: &Path) -> Result<Array2<f64>> {
    let table = read_float_table(path)?;
    let mut bad_entries = 0usize;
    let mut bad_sums = 0usize;
    for row in table.rows() {
        if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            bad_entries += 1;
        }
        if (row.sum() - 1.0).abs() > 1e-6 {
            bad_sums += 1;
        }
    }
    if bad_entries > 0 {
        log::warn!(
            "{}: {} rows have proportions outside [0,1]",
            path.display(),
            bad_entries
        );
    }
    if bad_sums > 0 {
        log::warn!(
            "{}: {} rows do not sum to 1",
            path.display(),
            bad_sums
        );
    }
    Ok(table.t().to_owned())
}

/// ADMIXTURE .P table: m rows of k' frequencies, returned as parsed (m x k').
pub fn read_p(path: &Path) -> Result<Array2<f64>> {
    read_float_table(path)
}

/// Plain-text genotypes: one SNP per line, tab-separated 0/1/2 counts.
pub fn read_tsv_genotypes(path: &Path, policy: MissingPolicy) -> Result<IngestReport> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split('\t') {
            let v = if tok == "NA" {
                MISSING
            } else {
                tok.parse::<u8>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    detail: format!("bad genotype token '{}'", tok),
                })?
            };
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    detail: format!(
                        "row has {} genotypes, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Ingestion(format!("{}: no SNPs", path.display())));
    }
    let (m, n) = (rows.len(), rows[0].len());
    let flat: Vec<u8> = rows.into_iter().flatten().collect();
    let raw = Array2::from_shape_vec((m, n), flat)
        .map_err(|e| Error::Ingestion(format!("{}: {}", path.display(), e)))?;
    validate_genotypes(raw.view(), policy)
}

pub fn write_tsv_genotypes(g: &GenotypeMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in g.data().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

/// Headered TSV matrix dump with deterministic 17-significant-digit floats
/// (round-trips f64 exactly).
pub fn write_matrix_tsv(m: ArrayView2<'_, f64>, headers: &[String], path: &Path) -> Result<()> {
    if headers.len() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} headers for {} columns",
            headers.len(),
            m.ncols()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", headers.join("\t"))?;
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{:.17e}", v)).collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a matrix written by [`write_matrix_tsv`].
pub fn read_matrix_tsv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::Ingestion(format!("{}: empty file", path.display()))),
    };
    let headers: Vec<String> = header.split('\t').map(str::to_string).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split('\t')
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 2,
                    detail: format!("non-numeric token '{}'", tok),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != headers.len() {
            return Err(Error::Parse {
                line: lineno + 2,
                detail: format!("row has {} fields, expected {}", row.len(), headers.len()),
            });
        }
        rows.push(row);
    }
    let (r, c) = (rows.len(), headers.len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let m = Array2::from_shape_vec((r, c), flat)
        .map_err(|e| Error::Ingestion(format!("{}: {}", path.display(), e)))?;
    Ok((headers, m))
}

/// One label per line, aligned with individual order.
pub fn write_labels(labels: &[String], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(w, "{}", l)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    let mut labels = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            labels.push(line.trim().to_string());
        }
    }
    if labels.is_empty() {
        return Err(Error::Ingestion(format!("{}: no labels", path.display())));
    }
    Ok(labels)
}

/// Run manifest: sorted key<TAB>value lines, always carrying format_version.
/// The keys record enough of the invocation to replay it exactly.
pub fn write_manifest(entries: &[(String, String)], path: &Path) -> Result<()> {
    let mut all: Vec<(String, String)> = entries.to_vec();
    all.push((
        "format_version".to_string(),
        MANIFEST_FORMAT_VERSION.to_string(),
    ));
    all.sort();
    all.dedup();
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in all {
        writeln!(w, "{}\t{}", k, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((k, v)) => entries.push((k.to_string(), v.to_string())),
            None => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    detail: "manifest line has no tab separator".into(),
                })
            }
        }
    }
    Ok(entries)
}

/// Gram accumulation directly off a streaming bed reader, one block resident.
pub fn gram_raw_from_bed(bed: &Path, m: usize, n: usize) -> Result<Array2<f64>> {
    let reader = BedBlockReader::open(bed, m, n)?;
    let blocks = reader.map(|b| {
        let b = b?;
        if b.iter().any(|&g| g == MISSING) {
            return Err(Error::Ingestion(
                "missing genotypes present; resolve them before gram accumulation".into(),
            ));
        }
        Ok(b)
    });
    crate::estimators::gram_raw_streamed(blocks, n)
}
