//! Data retrieval and preparation for the euro-area panel: SDMX and local
//! CSV sources, a checksummed cache, variable transforms and panel assembly.

pub mod catalog;
pub mod error;
pub mod fetch;
pub mod panel;
pub mod pipeline;
pub mod series;
pub mod transform;

pub use catalog::Variant;
pub use error::{Error, Result};
pub use fetch::{fetch_series, HttpTransport, NoNetwork, Provider, SeriesCache, SeriesRequest, Transport, TransportError};
pub use panel::{assemble_panel, read_panel_dir, sample_window, write_panel_dir, CountrySeries};
pub use pipeline::{build_panel, BuiltPanel, DataSource, FetchPlan};
pub use series::Series;
pub use transform::{apply_transform, TransformSpec};
