#pragma once

#include "adacanon/canon.hpp"
#include "adacanon/groups.hpp"
#include "adacanon/matrix.hpp"
#include "adacanon/mlp.hpp"

namespace adacanon {

struct PointCloud {
    Matrix points;  // N x 3
    int label = -1;

    std::size_t size() const { return points.rows(); }
};

struct KnnGraph {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> neighbors;  // min(k, N-1) per point, no self
};

enum class MultisetMode { Brute, Greedy };

/// min over row permutations of ||X - rho(s) Y||_F. Brute mode enumerates
/// all N! permutations (N <= 8); greedy mode pairs lexicographically
/// sorted rows and is only an upper bound.
///
/// Throws std::invalid_argument (SizeMismatch / TooLargeForBrute).
double multiset_distance(const PointCloud& x, const PointCloud& y, MultisetMode mode);

/// Euclidean k-nearest neighbors per point, ties broken by lower index.
KnnGraph knn_graph(const PointCloud& x, std::size_t k);

enum class BackboneKind { DeepSet, PointNet, Dgcnn };

/// Shared-parameter point backbone producing one feature vector per cloud.
///   deepset:  sum over phi(x_i), then the post net.
///   pointnet: columnwise max over phi(x_i), then the post net.
///   dgcnn:    per-edge relu(edge_mlp(x_j - x_i, x_i)), max over neighbors,
///             then max over points, then the post net.
struct PointBackbone {
    BackboneKind kind = BackboneKind::DeepSet;
    MlpParams per_point;  // phi (input 3) or the edge net (input 6)
    MlpParams post;       // xi / head
    std::size_t knn_k = 8;

    std::size_t feature_dim() const { return post.output_dim(); }
};

struct BackboneGradients {
    Gradients per_point;
    Gradients post;
};

PointBackbone make_backbone(BackboneKind kind, std::size_t hidden, std::size_t feature,
                            std::size_t knn_k, RngStream rng);

/// Feature vector for a cloud; drop-in tapes for the backward pass.
struct BackboneTape {
    Matrix point_features;               // per point (or per edge) pooled inputs
    std::vector<ForwardTape> unit_tapes; // per point / per edge
    std::vector<std::size_t> pool_argmax;
    std::vector<std::size_t> edge_src;   // dgcnn: anchor per edge row
    std::vector<std::vector<std::size_t>> point_pool_argmax;  // dgcnn stage 1
    ForwardTape post_tape;
    std::vector<double> pooled;
};

std::vector<double> backbone_forward(const PointBackbone& b, const PointCloud& x,
                                     BackboneTape* tape = nullptr);

/// Parameter gradients of <upstream, feature>; the cloud (and hence the
/// selected orientation) is a constant input.
BackboneGradients backbone_backward(const PointBackbone& b, const PointCloud& x,
                                    const BackboneTape& tape,
                                    const std::vector<double>& upstream);

/// deepset_forward / pointnet_forward / dgcnn_edgeconv from the module
/// contract, expressed through the shared backbone machinery.
std::vector<double> deepset_forward(const PointCloud& x, const MlpParams& phi,
                                    const MlpParams& xi);
std::vector<double> pointnet_forward(const PointCloud& x, const MlpParams& phi,
                                     const MlpParams& head);
/// One edge-convolution stage: per-point features pooled over neighbors.
Matrix dgcnn_edgeconv(const PointCloud& x, const KnnGraph& graph, const MlpParams& edge_mlp);

/// Rotate the rows: x_i -> x_i Rᵀ.
PointCloud rotate_cloud(const PointCloud& x, const Rotation3& r);

/// The SO(3) family for point clouds: Haar rotation candidates,
/// axis-angle refinement, compose = rotation product. For dgcnn the knn
/// graph is rebuilt after rotation (Euclidean knn is rotation invariant
/// up to ties, so it matches the unrotated graph away from ties).
struct AcPointModel {
    PointBackbone backbone;
    std::vector<MlpParams> heads;  // feature -> 1 per class

    std::size_t num_classes() const { return heads.size(); }
};

AcPointModel make_ac_point_model(BackboneKind kind, std::size_t hidden, std::size_t feature,
                                 std::size_t knn_k, std::size_t num_classes, RngStream rng);

PointScore ac_point_score(const AcPointModel& model, std::size_t class_id);

TransformationFamily<Rotation3, PointCloud> so3_family(const AcPointModel& model);

struct AcClassification {
    std::vector<CanonDecision<Rotation3>> decisions;
    int predicted = -1;
};

/// Per-class prior maximization over SO(3) followed by the one-vs-rest
/// argmax. A zero-candidate interpretation is not allowed; K = 1 with
/// refine 0 reduces to plain classification at the sampled pose, and
/// `force_identity` pins the single candidate to the identity rotation.
AcClassification ac_classify(const AcPointModel& model, const PointCloud& x,
                             const std::vector<Prior>& priors, const SearchBudget& budget,
                             RngStream rng, bool force_identity = false);

/// Parameter gradients of <upstream, logit_d> at a fixed rotation.
void ac_point_backward(const AcPointModel& model, const PointCloud& x, const Rotation3& r,
                       std::size_t class_id, double upstream, BackboneGradients& backbone_grad,
                       Gradients& head_grad);

}  // namespace adacanon
