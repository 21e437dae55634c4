//! In-process federation: client roster, FedAvg aggregation and the two
//! round loops (federated MADE, then weighted classification).

mod aggregate;
mod client;
mod rounds;

pub use aggregate::fedavg_aggregate;
pub use client::{
    client_stream, local_train_round, ClientState, FederationState, LocalTrainConfig,
};
pub use rounds::{
    initial_classifier, run_federated_classification, run_federated_made, ClassificationRun,
    ClassifierConfig, FederatedMade, FederatedMadeConfig, MadeRound, RoundMetrics, Variant,
};
