#include "adacanon/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace adacanon {

namespace {

Matrix torus_adjacency(std::size_t side) {
    const std::size_t n = side * side;
    Matrix a(n, n);
    auto id = [side](std::size_t x, std::size_t y) { return x * side + y; };
    for (std::size_t x = 0; x < side; ++x)
        for (std::size_t y = 0; y < side; ++y) {
            const std::size_t i = id(x, y);
            a(i, id((x + 1) % side, y)) = 1.0;
            a(i, id((x + side - 1) % side, y)) = 1.0;
            a(i, id(x, (y + 1) % side)) = 1.0;
            a(i, id(x, (y + side - 1) % side)) = 1.0;
        }
    return a;
}

// One grid sample: the template pair of windowed sinusoids pushed through
// the automorphism (dx, dy, swap), with per-support noise.
Matrix grid_signal(const GridTaskConfig& cfg, int label, std::size_t dx, std::size_t dy,
                   bool swap, RngStream* noise) {
    const std::size_t side = cfg.side;
    Matrix s(side * side, 2);
    const double w = 2.0 * M_PI / static_cast<double>(cfg.period);
    for (std::size_t x = 0; x < side; ++x)
        for (std::size_t y = 0; y < side; ++y) {
            // Source coordinates of the inverse automorphism.
            std::size_t xs = (x + side - dx) % side;
            std::size_t ys = (y + side - dy) % side;
            if (swap) std::swap(xs, ys);
            const bool in_first_half = ((xs + ys) % side) < side / 2;
            const std::size_t i = x * side + y;
            if (in_first_half) {
                s(i, 0) = std::sin(w * static_cast<double>(xs));
                if (noise) s(i, 0) += cfg.noise_sigma * noise->next_gaussian();
            } else {
                s(i, 1) = (label == 0) ? std::sin(w * static_cast<double>(xs))
                                       : std::sin(w * static_cast<double>(ys));
                if (noise) s(i, 1) += cfg.noise_sigma * noise->next_gaussian();
            }
        }
    return s;
}

void check_grid_config(const GridTaskConfig& cfg) {
    if (cfg.side == 0 || cfg.side % 2 != 0)
        throw std::invalid_argument("make_grid_task: BadConfig (side must be even)");
    if (cfg.period == 0 || cfg.side % cfg.period != 0)
        throw std::invalid_argument("make_grid_task: BadConfig (period must divide side)");
}

}  // namespace

GraphDataset make_grid_task(const GridTaskConfig& cfg) {
    check_grid_config(cfg);
    GraphDataset out;
    out.adjacency = torus_adjacency(cfg.side);

    RngStream root(cfg.seed, 0x6219ULL);
    for (std::size_t i = 0; i < cfg.sample_count; ++i) {
        const int label = static_cast<int>(i % 2);  // exact balance
        RngStream srng = root.derive(i);
        std::size_t dx = 0, dy = 0;
        bool swap = false;
        if (cfg.randomize) {
            dx = srng.next_below(cfg.side);
            dy = srng.next_below(cfg.side);
            swap = srng.next_below(2) == 1;
        }
        RngStream noise = srng.derive(1);
        RngStream* noise_ptr = cfg.noise_sigma > 0.0 ? &noise : nullptr;
        out.signals.push_back(grid_signal(cfg, label, dx, dy, swap, noise_ptr));
        out.labels.push_back(label);
    }

    // Deterministic shuffle so labels are not order-coded in the file.
    RngStream shuffle = root.derive(0x5F0FULL);
    for (std::size_t i = out.size(); i > 1; --i) {
        const std::size_t j = shuffle.next_below(i);
        std::swap(out.signals[i - 1], out.signals[j]);
        std::swap(out.labels[i - 1], out.labels[j]);
    }
    return out;
}

std::pair<Graph, Graph> grid_task_templates(const GridTaskConfig& cfg) {
    check_grid_config(cfg);
    Matrix adj = torus_adjacency(cfg.side);
    Graph g0, g1;
    g0.n = g1.n = cfg.side * cfg.side;
    g0.adjacency = adj;
    g1.adjacency = std::move(adj);
    g0.signal = grid_signal(cfg, 0, 0, 0, false, nullptr);
    g1.signal = grid_signal(cfg, 1, 0, 0, false, nullptr);
    g0.label = 0;
    g1.label = 1;
    return {std::move(g0), std::move(g1)};
}

std::vector<PointCloud> make_shape_dataset(const ShapeConfig& cfg) {
    if (cfg.points_per_cloud < 8)
        throw std::invalid_argument("make_shape_dataset: BadConfig (n-points >= 8)");
    std::vector<PointCloud> out;
    RngStream root(cfg.seed, 0x5A57ULL);

    for (std::size_t c = 0; c < cfg.per_class; ++c) {
        for (int label = 0; label < 3; ++label) {
            RngStream rng = root.derive(label, c);
            PointCloud cloud;
            cloud.label = label;
            cloud.points = Matrix(cfg.points_per_cloud, 3);
            for (std::size_t i = 0; i < cfg.points_per_cloud; ++i) {
                double p[3] = {0.0, 0.0, 0.0};
                if (label == 0) {
                    // Axis-aligned ellipsoid, axes (1, 0.5, 0.25).
                    double u[3] = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
                    const double norm = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
                    p[0] = u[0] / norm;
                    p[1] = 0.5 * u[1] / norm;
                    p[2] = 0.25 * u[2] / norm;
                } else if (label == 1) {
                    // Two orthogonal unit discs (xy and xz planes).
                    const double r = std::sqrt(rng.next_double());
                    const double a = 2.0 * M_PI * rng.next_double();
                    if (i % 2 == 0) {
                        p[0] = r * std::cos(a);
                        p[1] = r * std::sin(a);
                    } else {
                        p[0] = r * std::cos(a);
                        p[2] = r * std::sin(a);
                    }
                } else {
                    // Helix: two turns, radius 1, height 2.
                    const double t = 4.0 * M_PI * rng.next_double();
                    p[0] = std::cos(t);
                    p[1] = std::sin(t);
                    p[2] = t / (2.0 * M_PI) - 1.0;
                }
                for (std::size_t d = 0; d < 3; ++d)
                    cloud.points(i, d) = p[d] + cfg.jitter * rng.next_gaussian();
            }
            out.push_back(std::move(cloud));
        }
    }
    return out;
}

namespace {

Matrix circulant_adjacency(std::size_t n, const std::vector<std::size_t>& offsets) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o : offsets) {
            a(i, (i + o) % n) = 1.0;
            a((i + o) % n, i) = 1.0;
        }
    return a;
}

}  // namespace

GraphDataset make_band_orientation_graphs(const BandOrientationConfig& cfg) {
    if (cfg.n_nodes < 8)
        throw std::invalid_argument("make_band_orientation_graphs: BadConfig (n >= 8)");
    if (cfg.degree % 2 != 0 || cfg.degree / 2 >= cfg.n_nodes / 2 - 1)
        throw std::invalid_argument("make_band_orientation_graphs: BadConfig (degree)");

    RngStream root(cfg.seed, 0xBA2DULL);

    // Random symmetric connection set: circulant graphs are regular and
    // carry exact 2-dim harmonic eigenspaces.
    std::set<std::size_t> chosen;
    RngStream topo = root.derive(0);
    chosen.insert(1);  // keep the graph connected
    while (chosen.size() < cfg.degree / 2)
        chosen.insert(1 + topo.next_below(cfg.n_nodes / 2 - 1));

    GraphDataset out;
    out.adjacency = circulant_adjacency(cfg.n_nodes, {chosen.begin(), chosen.end()});

    // Reference harmonic: an interior frequency, so cos/sin span a true
    // 2-dim eigenspace of the normalized Laplacian.
    const std::size_t harmonic = 2 + topo.next_below(cfg.n_nodes / 2 - 3);
    const double norm = std::sqrt(cfg.n_nodes / 2.0);
    std::vector<double> vcos(cfg.n_nodes), vsin(cfg.n_nodes);
    for (std::size_t x = 0; x < cfg.n_nodes; ++x) {
        const double t = 2.0 * M_PI * static_cast<double>(harmonic * x) / cfg.n_nodes;
        vcos[x] = std::cos(t) / norm;
        vsin[x] = std::sin(t) / norm;
    }

    for (std::size_t i = 0; i < cfg.sample_count; ++i) {
        const int label = static_cast<int>(i % cfg.num_classes);
        RngStream srng = root.derive(1, i);
        const double theta = cfg.angle_separation * label + cfg.angle_jitter * srng.next_gaussian();
        Matrix s(cfg.n_nodes, 2);
        for (std::size_t x = 0; x < cfg.n_nodes; ++x) {
            s(x, 0) = vcos[x] + cfg.noise_sigma * srng.next_gaussian();
            s(x, 1) = std::cos(theta) * vcos[x] + std::sin(theta) * vsin[x] +
                      cfg.noise_sigma * srng.next_gaussian();
        }
        out.signals.push_back(std::move(s));
        out.labels.push_back(label);
    }
    return out;
}

std::vector<int> band_orientation_grid_oracle(const GraphDataset& data,
                                              const BandOrientationConfig& cfg) {
    // Recover the harmonic pair the generator used and classify each
    // sample by the nearest class angle over a 1-degree grid.
    RngStream root(cfg.seed, 0xBA2DULL);
    RngStream topo = root.derive(0);
    std::set<std::size_t> chosen;
    chosen.insert(1);
    while (chosen.size() < cfg.degree / 2)
        chosen.insert(1 + topo.next_below(cfg.n_nodes / 2 - 1));
    const std::size_t harmonic = 2 + topo.next_below(cfg.n_nodes / 2 - 3);

    const double norm = std::sqrt(cfg.n_nodes / 2.0);
    std::vector<double> vcos(cfg.n_nodes), vsin(cfg.n_nodes);
    for (std::size_t x = 0; x < cfg.n_nodes; ++x) {
        const double t = 2.0 * M_PI * static_cast<double>(harmonic * x) / cfg.n_nodes;
        vcos[x] = std::cos(t) / norm;
        vsin[x] = std::sin(t) / norm;
    }

    std::vector<int> preds;
    for (std::size_t i = 0; i < data.size(); ++i) {
        // In-band coefficient 2-vectors of both channels.
        double c1[2] = {0.0, 0.0}, c2[2] = {0.0, 0.0};
        for (std::size_t x = 0; x < cfg.n_nodes; ++x) {
            c1[0] += vcos[x] * data.signals[i](x, 0);
            c1[1] += vsin[x] * data.signals[i](x, 0);
            c2[0] += vcos[x] * data.signals[i](x, 1);
            c2[1] += vsin[x] * data.signals[i](x, 1);
        }
        // Relative in-band angle of channel 2 against channel 1.
        const double ref = std::atan2(c1[1], c1[0]);
        const double ang = std::atan2(c2[1], c2[0]);
        int best = 0;
        double best_score = -1e300;
        for (int grid = 0; grid < 360; ++grid) {
            const double phi = 2.0 * M_PI * grid / 360.0;
            // Grid angle aligned with the observed relative angle.
            const double score = std::cos(ang - ref - phi);
            int cls = 0;
            double cls_err = 1e300;
            for (std::size_t d = 0; d < cfg.num_classes; ++d) {
                const double target = cfg.angle_separation * static_cast<double>(d);
                const double err = 1.0 - std::cos(phi - target);
                if (err < cls_err) {
                    cls_err = err;
                    cls = static_cast<int>(d);
                }
            }
            if (score > best_score) {
                best_score = score;
                best = cls;
            }
        }
        preds.push_back(best);
    }
    return preds;
}

void write_graph_dataset(const GraphDataset& data, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_graph_dataset: cannot open " + path);
    const std::size_t n = data.adjacency.rows();
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            if (data.adjacency(i, j) != 0.0) edges.push_back({i, j, data.adjacency(i, j)});

    for (std::size_t s = 0; s < data.size(); ++s) {
        nlohmann::ordered_json line;
        line["n"] = n;
        line["edges"] = edges;
        auto& sig = line["signal"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < n; ++i) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (std::size_t t = 0; t < data.signals[s].cols(); ++t)
                row.push_back(data.signals[s](i, t));
            sig.push_back(std::move(row));
        }
        line["label"] = data.labels[s];
        f << line.dump() << "\n";
    }
}

GraphDataset read_graph_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_graph_dataset: cannot open " + path);
    GraphDataset out;
    std::string line;
    std::uint64_t topo_hash = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const std::size_t n = j.at("n");
        Matrix adj(n, n);
        for (const auto& e : j.at("edges")) {
            const std::size_t a = e[0], b = e[1];
            const double w = e[2];
            adj(a, b) = w;
            adj(b, a) = w;
        }
        const std::uint64_t h =
            fnv1a64(adj.data().data(), adj.data().size() * sizeof(double));
        if (out.signals.empty()) {
            out.adjacency = std::move(adj);
            topo_hash = h;
        } else if (h != topo_hash) {
            throw std::runtime_error(
                "read_graph_dataset: mixed topologies in one file are not supported");
        }
        const auto& sig = j.at("signal");
        const std::size_t t = sig.at(0).size();
        Matrix s(n, t);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < t; ++c) s(i, c) = sig[i][c];
        out.signals.push_back(std::move(s));
        out.labels.push_back(j.at("label"));
    }
    return out;
}

void write_cloud_dataset(const std::vector<PointCloud>& clouds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_cloud_dataset: cannot open " + path);
    for (const auto& c : clouds) {
        nlohmann::ordered_json line;
        auto& pts = line["points"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < c.size(); ++i)
            pts.push_back({c.points(i, 0), c.points(i, 1), c.points(i, 2)});
        line["label"] = c.label;
        f << line.dump() << "\n";
    }
}

std::vector<PointCloud> read_cloud_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_cloud_dataset: cannot open " + path);
    std::vector<PointCloud> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto& pts = j.at("points");
        PointCloud c;
        c.points = Matrix(pts.size(), 3);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t d = 0; d < 3; ++d) c.points(i, d) = pts[i][d];
        c.label = j.at("label");
        out.push_back(std::move(c));
    }
    return out;
}

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("file_checksum: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(f.gcount()), h);
    return h;
}

void write_manifest(const std::string& dataset_path, const std::string& generator,
                    const std::string& config_echo, std::uint64_t seed,
                    const std::string& manifest_path) {
    nlohmann::ordered_json m;
    m["generator"] = generator;
    m["config"] = config_echo;
    m["seed"] = seed;
    m["dataset"] = dataset_path;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(file_checksum(dataset_path)));
    m["checksum_fnv1a64"] = hex;
    std::ofstream f(manifest_path);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + manifest_path);
    f << m.dump(2) << "\n";
}

}  // namespace adacanon
