#pragma once

#include <functional>
#include <string>

#include "adacanon/canon.hpp"
#include "adacanon/linalg.hpp"
#include "adacanon/matrix.hpp"
#include "adacanon/mlp.hpp"

namespace adacanon {

/// Undirected weighted graph with a multi-channel node signal.
struct Graph {
    std::size_t n = 0;
    Matrix adjacency;  // n x n, symmetric, non-negative
    Matrix signal;     // n x T
    int label = -1;
};

enum class GsoKind { NormalizedLaplacian, Adjacency, CombinatorialLaplacian };

/// L = I - D^{-1/2} A D^{-1/2} with the isolated-node convention that a
/// zero-degree node keeps an identity row/column. Eigenvalues land in
/// [0, 2] (within float noise) for non-negative symmetric adjacency.
///
/// Throws std::invalid_argument (AsymmetricAdjacency / NegativeWeight).
Matrix normalized_laplacian(const Graph& g);

/// Graph shift operator selector. Eigenvalue-range assumptions are only
/// validated for the normalized Laplacian.
Matrix gso_matrix(const Graph& g, GsoKind kind);

/// Functional calculus: V f(Lambda) Vᵀ via eigh_symmetric.
Matrix apply_scalar_function(const Matrix& l, const std::function<double(double)>& f);

/// Ascending band boundaries b_0 < ... < b_B; band k is [b_{k-1}, b_k)
/// with the lowest band extended down to 0 and the top band closed at b_B.
struct BandPlan {
    std::vector<double> boundaries;
    double decay = 0.0;

    std::size_t bands() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
    double lambda_max() const { return boundaries.back(); }

    /// Band index (0-based) for an eigenvalue, with near-boundary snapping
    /// at relative tolerance 1e-9 * lambda_max.
    std::size_t band_of(double lambda) const;

    std::uint64_t fingerprint() const;
};

/// Dyadic plan: b_k = lambda_max * r^(S-k) for k = 0..S.
/// Throws std::invalid_argument (BadDecay) unless 0 < r < 1.
BandPlan dyadic_band_plan(double lambda_max, double r, std::size_t band_count);

/// Eigenpairs of the GSO grouped into bands. basis[k] is n x M_k with the
/// in-band columns in ascending eigenvalue order; dims[k] may be zero.
struct BandDecomposition {
    std::vector<Matrix> basis;
    std::vector<std::vector<double>> eigenvalues;
    std::vector<std::size_t> dims;
    std::size_t n = 0;

    std::size_t bands() const { return dims.size(); }
    /// X_k X_kᵀ, the projection onto band k.
    Matrix projection(std::size_t k) const;
};

BandDecomposition band_decompose(const Matrix& gso, const BandPlan& plan);

/// Re-band an existing eigendecomposition (values ascending).
BandDecomposition band_decompose(const EigenPairs& ep, const BandPlan& plan);

/// Per-band spectral coefficients C_k = X_kᵀ S.
struct SpectralCoeffs {
    std::vector<Matrix> per_band;  // M_k x T (empty matrix when M_k = 0)
    std::size_t channels = 0;

    std::size_t bands() const { return per_band.size(); }
};

SpectralCoeffs spectral_coefficients(const BandDecomposition& dec, const Matrix& signal);

/// Pad/truncate to target rows per band: the first min(M_k, J_k) rows are
/// kept (ascending eigenvalue order), the rest zero-filled, bands
/// concatenated. Output is (sum J_k) x T.
Matrix pad_truncate(const SpectralCoeffs& coeffs, const std::vector<std::size_t>& target_rows);

/// Block sequence (U_1, ..., U_B), U_k in O(M_k); empty where M_k = 0 or
/// a band is dropped from the model.
struct OrthogonalBlock {
    std::vector<Matrix> blocks;
};

OrthogonalBlock identity_block(const std::vector<std::size_t>& dims);

/// Cross-class orientation spread: sum over bands and unordered class
/// pairs of ||U_k^(d) - U_k^(d')||_F^2, with the ambient gradient per
/// class. Added to the refinement objective with weight lambda_reg it
/// rewards class-distinct orientations.
struct RegularizerResult {
    double penalty = 0.0;
    std::vector<OrthogonalBlock> gradients;  // per class
};

RegularizerResult orientation_regularizer(const std::vector<OrthogonalBlock>& class_blocks);

/// The anisotropic spectral classifier: a shared trunk `phi` on the
/// rotated, padded, flattened coefficients and one scalar head per class.
struct AnlsfModel {
    BandPlan plan;
    std::vector<std::size_t> band_dims;    // M_k of the decomposition it was built for
    std::vector<std::size_t> jk;           // target rows per band (0 drops the band)
    std::size_t channels = 0;
    MlpParams phi;
    std::vector<MlpParams> heads;

    std::size_t flat_dim() const;
    std::size_t num_classes() const { return heads.size(); }
};

AnlsfModel make_anlsf_model(const BandPlan& plan, const std::vector<std::size_t>& band_dims,
                            const std::vector<std::size_t>& jk, std::size_t channels,
                            std::size_t num_classes, std::size_t hidden, RngStream rng);

/// Rotate per band, pad, flatten band-major / row / channel.
std::vector<double> anlsf_flatten(const AnlsfModel& model, const SpectralCoeffs& coeffs,
                                  const OrthogonalBlock& block);

/// Class-d logit. Throws std::invalid_argument (BlockDimMismatch).
double anlsf_forward(const AnlsfModel& model, const SpectralCoeffs& coeffs,
                     const OrthogonalBlock& block, std::size_t class_id);

/// Differentiable score for class d over flattened points.
PointScore anlsf_score(const AnlsfModel& model, std::size_t class_id);

/// Parameter gradients of <upstream, logit_d> with the chosen block held
/// constant; accumulates into phi/head gradient sinks.
void anlsf_backward(const AnlsfModel& model, const SpectralCoeffs& coeffs,
                    const OrthogonalBlock& block, std::size_t class_id, double upstream,
                    Gradients& phi_grad, Gradients& head_grad);

/// Gradient-ascent refinement over the block product manifold with polar
/// retraction per block, same acceptance contract as refine_orthogonal.
OrthogonalBlock refine_orthogonal_block(const OrthogonalBlock& u0,
                                        const TransformObjective<OrthogonalBlock>& objective,
                                        int steps, double step_size);

/// The per-band family: Haar block candidates, blockwise refinement, and
/// the composition law (compose is right-multiplication by the transposed
/// basis change), so orbit-consistent invariance checks are exact.
TransformationFamily<OrthogonalBlock, SpectralCoeffs> anlsf_family(const AnlsfModel& model);

/// Per-class prior maximization for one input. When lambda_reg > 0,
/// classes are decided in order and each refinement objective adds
/// lambda_reg times the orientation spread against the already-decided
/// classes.
std::vector<CanonDecision<OrthogonalBlock>> anlsf_canonicalize(
    const AnlsfModel& model, const SpectralCoeffs& coeffs, const std::vector<Prior>& priors,
    const SearchBudget& budget, RngStream rng, double lambda_reg = 0.0);

/// Band-wise synthesis back to the node domain: the flattened rotated
/// coefficients go through `feature_map` (identity reproduces the input
/// signal under full cover and identity blocks), are cut back into bands,
/// and each band is re-embedded as V_k U_kᵀ Y_k.
Matrix anlsf_node_synthesis(
    const BandDecomposition& dec, const SpectralCoeffs& coeffs, const OrthogonalBlock& block,
    const std::vector<std::size_t>& jk,
    const std::function<std::vector<double>(const std::vector<double>&)>& feature_map,
    std::size_t out_channels);

/// Content hash of (n, adjacency); used as the decomposition cache key.
std::uint64_t graph_hash(const Graph& g);

/// Binary little-endian decomposition cache with the plan fingerprint and
/// graph hash in the header. load returns false on any mismatch.
void save_decomposition(const BandDecomposition& dec, const BandPlan& plan,
                        std::uint64_t graph_hash, const std::string& path);
bool load_decomposition(BandDecomposition& dec, const BandPlan& plan, std::uint64_t graph_hash,
                        const std::string& path);

}  // namespace adacanon
