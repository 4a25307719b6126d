//! Tokenization, frequency-table construction and table persistence.

mod persist;
mod table;
mod tokenize;
mod zipf_list;

pub use persist::{load_table, parse_table, save_table, write_table, TABLE_MAGIC};
pub use table::{
    build_table, build_table_parallel, ingest_corpus, CorpusFormat, FrequencyTable, IngestReport,
    TableBuilder,
};
pub use tokenize::{tokenize, TokenizerConfig};
pub use zipf_list::{import_zipf_list, DEFAULT_VIRTUAL_TOTAL};
