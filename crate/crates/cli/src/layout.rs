//! Where each command reads and writes its artifacts below the output
//! directory.

use std::path::{Path, PathBuf};

use clues_core::profiles::{Category, KnowledgeType};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn construction(&self) -> PathBuf {
        self.root.join("construction")
    }

    pub fn households(&self) -> PathBuf {
        self.construction().join("households.json")
    }

    pub fn experts(&self) -> PathBuf {
        self.construction().join("experts.json")
    }

    pub fn construction_report(&self) -> PathBuf {
        self.construction().join("report.txt")
    }

    pub fn index(&self, corpus: KnowledgeType) -> PathBuf {
        self.construction().join("knowledge").join(format!("{}.index.jsonl", corpus.name()))
    }

    pub fn chunks(&self, corpus: KnowledgeType) -> PathBuf {
        self.construction().join("knowledge").join(format!("{}.chunks.jsonl", corpus.name()))
    }

    /// Run artifacts for an ablation slug (`full` for the complete agents).
    pub fn run(&self, label: &str) -> RunDir {
        RunDir(self.root.join("runs").join(label))
    }

    pub fn report(&self, label: &str) -> PathBuf {
        self.root.join("reports").join(label)
    }

    pub fn ablation(&self) -> PathBuf {
        self.root.join("ablation")
    }

    pub fn preestimate(&self) -> PathBuf {
        self.root.join("preestimate")
    }
}

#[derive(Debug, Clone)]
pub struct RunDir(pub PathBuf);

impl RunDir {
    pub fn records(&self) -> PathBuf {
        self.0.join("records.jsonl")
    }

    pub fn manifest(&self) -> PathBuf {
        self.0.join("manifest.json")
    }

    pub fn knowledge(&self) -> PathBuf {
        self.0.join("knowledge.jsonl")
    }

    pub fn status(&self) -> PathBuf {
        self.0.join("status.json")
    }
}
