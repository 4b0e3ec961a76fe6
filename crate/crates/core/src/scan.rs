//! Directory-tree collection of `.feature` files, one top-level directory
//! per repository.

use crate::error::{Error, Result};
use crate::gherkin::{parse_feature_bytes, FeatureFile, ParseError};
use crate::identity::LicenseClass;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use walkdir::WalkDir;

/// Repository id used for feature files sitting directly under the root.
pub const ROOT_REPO: &str = ".";

struct Located {
    abs: PathBuf,
    repo_id: String,
    rel: String,
}

fn locate(root: &Path, path: &Path) -> Located {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<String> = rel
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect();
    let (repo_id, rel) = match parts.split_first() {
        Some((first, rest)) if !rest.is_empty() => (first.clone(), rest.join("/")),
        _ => (ROOT_REPO.to_string(), parts.join("/")),
    };
    Located {
        abs: path.to_path_buf(),
        repo_id,
        rel,
    }
}

fn is_feature(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "feature")
}

/// Recursively parse every `.feature` file under `root` in lexicographic
/// path order. Files are parsed in parallel; the result order is fixed.
pub fn scan_tree(root: &Path) -> Result<Vec<FeatureFile>> {
    if !root.is_dir() {
        return Err(Error::Invalid(format!(
            "{} is not a readable directory",
            root.display()
        )));
    }
    let mut found = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.into());
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_dir() && is_feature(entry.path()) {
            found.push(locate(root, entry.path()));
        }
    }
    Ok(found
        .par_iter()
        .map(|loc| match fs::read(&loc.abs) {
            Ok(bytes) => parse_feature_bytes(&bytes, &loc.repo_id, &loc.rel),
            Err(e) => FeatureFile {
                repo_id: loc.repo_id.clone(),
                path: loc.rel.clone(),
                features: Vec::new(),
                parse_errors: vec![ParseError {
                    line_no: 0,
                    message: format!("unreadable file: {e}"),
                }],
            },
        })
        .collect())
}

const COPYLEFT_MARKERS: &[&str] = &[
    "gnu general public license",
    "gnu lesser general public license",
    "gnu library general public license",
    "gnu affero general public license",
    "mozilla public license",
    "eclipse public license",
    "european union public licence",
    "creative commons attribution-sharealike",
];

const PERMISSIVE_MARKERS: &[&str] = &[
    "mit license",
    "permission is hereby granted, free of charge",
    "apache license",
    "redistribution and use in source and binary forms",
    "isc license",
    "permission to use, copy, modify, and/or distribute",
    "this is free and unencumbered software",
    "zlib license",
    "boost software license",
];

/// Classify a licence text by well-known phrases. Copyleft markers win
/// over permissive ones (dual-licence files often quote both).
pub fn classify_license_text(text: &str) -> LicenseClass {
    let lower = text.to_lowercase();
    if COPYLEFT_MARKERS.iter().any(|m| lower.contains(m)) {
        LicenseClass::Copyleft
    } else if PERMISSIVE_MARKERS.iter().any(|m| lower.contains(m)) {
        LicenseClass::Permissive
    } else {
        LicenseClass::Unknown
    }
}

fn is_license_file(name: &str) -> bool {
    let upper = name.to_ascii_uppercase();
    ["LICENSE", "LICENCE", "COPYING", "UNLICENSE"]
        .iter()
        .any(|p| upper.starts_with(p))
}

/// Licence class of one repository directory: no licence file means
/// `Unlicensed`, an unrecognised one `Unknown`.
pub fn detect_license(repo_dir: &Path) -> LicenseClass {
    let Ok(entries) = fs::read_dir(repo_dir) else {
        return LicenseClass::Unlicensed;
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter(|e| is_license_file(&e.file_name().to_string_lossy()))
        .map(|e| e.path())
        .collect();
    if files.is_empty() {
        return LicenseClass::Unlicensed;
    }
    files.sort();
    let mut best = LicenseClass::Unknown;
    for path in files {
        let text = fs::read(&path)
            .map(|b| String::from_utf8_lossy(&b).into_owned())
            .unwrap_or_default();
        match classify_license_text(&text) {
            LicenseClass::Copyleft => return LicenseClass::Copyleft,
            LicenseClass::Permissive => best = LicenseClass::Permissive,
            _ => {}
        }
    }
    best
}

/// Licence class for every repository id present in `files`.
pub fn repo_licenses(root: &Path, files: &[FeatureFile]) -> BTreeMap<String, LicenseClass> {
    let mut out = BTreeMap::new();
    for file in files {
        out.entry(file.repo_id.clone()).or_insert_with(|| {
            if file.repo_id == ROOT_REPO {
                detect_license(root)
            } else {
                detect_license(&root.join(&file.repo_id))
            }
        });
    }
    out
}
