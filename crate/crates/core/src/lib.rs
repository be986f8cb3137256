//! Engagement-coefficient estimation from social-media interaction counts,
//! competing social-media features, and tools for measuring how well those
//! features predict asset returns.
//!
//! The modules follow the data flow: [`corpus`] ingests files and builds the
//! aggregated [`InteractionDataset`]; [`engagement`] fits the Poisson model;
//! [`features`] turns fits and posts into per-topic features; [`analytics`]
//! and [`backtest`] relate features to returns. [`synth`] generates seeded
//! synthetic universes and [`report`] writes the CSV outputs.

pub mod analytics;
pub mod backtest;
pub mod corpus;
pub mod engagement;
pub mod error;
pub mod features;
pub mod report;
pub mod synth;

pub use analytics::{PricePoint, PriceSeries, ReturnMatrix};
pub use backtest::{BacktestResult, StrategySpec, Trade};
pub use corpus::{
    Corpus, DatasetOptions, InteractionDataset, InteractionKindSet, Post, TopicMeta, UserProfile, MONTH_DAYS,
};
pub use engagement::{EngagementModel, FitReport};
pub use error::{AnalyticsError, CorpusError, EstimationError, FeatureError};
pub use features::{BotClustering, EstimationMode, FeatureName, FeatureRow, FeatureTable};
