//! Posting ingestion, dictionary skill extraction and per-title merging.

mod dataset;
mod extract;
mod normalize;
mod vocab;

pub use dataset::{
    build_raw_dataset, merge_by_title, read_postings, JobSkillRecord, MergedRecord, PostingRecord, PostingsFile,
    RawDataset, MAX_MALFORMED_FRACTION,
};
pub use extract::{extract_skills, SkillExtractor};
pub use normalize::normalize_title;
pub use vocab::{load_skill_vocabulary, write_skill_vocabulary, SkillEntry, SkillVocabulary};
