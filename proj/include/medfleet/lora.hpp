// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale low-rank adapter arithmetic (merge/unmerge), the per-specialty
// adapter registry, memory/capacity estimates, and manifest persistence.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medfleet/corpus.hpp"
#include "medfleet/detail/rng.hpp"

namespace medfleet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ZeroSizeModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Layer deltas

struct LayerDelta {
    std::string name;
    Matrix A;  // r×k
    Matrix B;  // d×r
    double scale = 1.0;  // α/r analogue

    Eigen::Index rank() const { return A.rows(); }
    Eigen::Index d() const { return B.rows(); }
    Eigen::Index k() const { return A.cols(); }
    long long param_count() const {
        return static_cast<long long>(d()) * rank() + static_cast<long long>(rank()) * k();
    }
};

inline void check_delta(const LayerDelta& delta) {
    if (delta.A.rows() != delta.B.cols())
        throw ShapeMismatchError("layer '" + delta.name + "': A is " +
                                 std::to_string(delta.A.rows()) + "x" +
                                 std::to_string(delta.A.cols()) + " but B is " +
                                 std::to_string(delta.B.rows()) + "x" +
                                 std::to_string(delta.B.cols()));
    if (delta.rank() < 1) throw ShapeMismatchError("layer '" + delta.name + "': rank < 1");
    if (delta.rank() > std::min(delta.d(), delta.k()))
        throw ShapeMismatchError("layer '" + delta.name + "': rank exceeds min(d, k)");
    if (!std::isfinite(delta.scale))
        throw ShapeMismatchError("layer '" + delta.name + "': non-finite scale");
}

inline void check_conformance(const Matrix& base, const LayerDelta& delta) {
    check_delta(delta);
    if (base.rows() != delta.d() || base.cols() != delta.k())
        throw ShapeMismatchError("layer '" + delta.name + "': base is " +
                                 std::to_string(base.rows()) + "x" + std::to_string(base.cols()) +
                                 " but delta targets " + std::to_string(delta.d()) + "x" +
                                 std::to_string(delta.k()));
}

// merged = base + scale × (B·A)
inline Matrix lora_merge(const Matrix& base, const LayerDelta& delta) {
    check_conformance(base, delta);
    return base + delta.scale * (delta.B * delta.A);
}

// Exact algebraic inverse of lora_merge; floating error stays within 1e-6
// for well-scaled inputs.
inline Matrix lora_unmerge(const Matrix& merged, const LayerDelta& delta) {
    check_conformance(merged, delta);
    return merged - delta.scale * (delta.B * delta.A);
}

// ---------------------------------------------------------------------------
// Adapter and model specs

inline constexpr double kDefaultBytesPerParam = 1.0;  // see fleet-report notes

struct AdapterSpec {
    SubSpecialty specialty = SubSpecialty::MED;
    std::vector<LayerDelta> deltas;  // unique layer names

    long long param_count() const {
        long long total = 0;
        for (const auto& d : deltas) total += d.param_count();
        return total;
    }
    double weight_bytes(double bytes_per_param = kDefaultBytesPerParam) const {
        return static_cast<double>(param_count()) * bytes_per_param;
    }
};

struct LayerShape {
    Eigen::Index d = 0;
    Eigen::Index k = 0;
};

struct ModelSpec {
    long long param_count = 0;
    double bytes_per_param = kDefaultBytesPerParam;
    std::map<std::string, LayerShape> layers;  // adapter-targeted layers only

    double memory_bytes() const {
        if (param_count <= 0 || bytes_per_param <= 0)
            throw ZeroSizeModelError("model has zero or negative size");
        return static_cast<double>(param_count) * bytes_per_param;
    }
};

inline double estimate_memory(const ModelSpec& model) { return model.memory_bytes(); }

// Maximum count of resident full models under the byte budget.
inline long long capacity(double budget_bytes, const ModelSpec& model) {
    return static_cast<long long>(budget_bytes / model.memory_bytes());
}

// ---------------------------------------------------------------------------
// Fleet registry

class DuplicateSpecialtyError : public std::runtime_error {
public:
    explicit DuplicateSpecialtyError(SubSpecialty s)
        : std::runtime_error("adapter already registered for " + std::string(to_code(s))) {}
};

// One adapter per specialty; registration is single-threaded, lookups are
// read-only thereafter.
class AdapterRegistry {
public:
    void register_adapter(AdapterSpec spec) {
        auto idx = static_cast<std::size_t>(spec.specialty);
        if (slots_[idx]) throw DuplicateSpecialtyError(spec.specialty);
        for (std::size_t i = 0; i < spec.deltas.size(); ++i)
            for (std::size_t j = i + 1; j < spec.deltas.size(); ++j)
                if (spec.deltas[i].name == spec.deltas[j].name)
                    throw ShapeMismatchError("duplicate layer name '" + spec.deltas[i].name +
                                             "' in adapter " + std::string(to_code(spec.specialty)));
        slots_[idx] = std::move(spec);
        ++count_;
    }

    const AdapterSpec& lookup(SubSpecialty s) const {
        const auto& slot = slots_[static_cast<std::size_t>(s)];
        if (!slot) throw UnknownSpecialtyError(std::string(to_code(s)));
        return *slot;
    }

    bool contains(SubSpecialty s) const { return slots_[static_cast<std::size_t>(s)].has_value(); }
    std::size_t size() const { return count_; }
    bool full() const { return count_ == kAllSpecialties.size(); }

private:
    std::array<std::optional<AdapterSpec>, kAllSpecialties.size()> slots_;
    std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Manifest persistence
//
// Line-delimited: a {"specialty": CODE} line opens an adapter, followed by one
// line per layer with shape headers and flat row-major factor arrays.

inline std::size_t write_adapter_manifest(const std::vector<AdapterSpec>& adapters,
                                          std::ostream& out) {
    for (const auto& adapter : adapters) {
        ordered_json header;
        header["specialty"] = std::string(to_code(adapter.specialty));
        out << header.dump() << '\n';
        for (const auto& delta : adapter.deltas) {
            ordered_json j;
            j["layer"] = delta.name;
            j["d"] = delta.d();
            j["k"] = delta.k();
            j["r"] = delta.rank();
            j["scale"] = delta.scale;
            std::vector<double> a(delta.A.data(), delta.A.data() + delta.A.size());
            std::vector<double> b(delta.B.data(), delta.B.data() + delta.B.size());
            j["A"] = a;
            j["B"] = b;
            out << j.dump() << '\n';
        }
    }
    if (!out) throw IoError("manifest write failed");
    return adapters.size();
}

inline std::size_t write_adapter_manifest(const std::vector<AdapterSpec>& adapters,
                                          const std::filesystem::path& dest) {
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + dest.string());
    return write_adapter_manifest(adapters, out);
}

inline std::vector<AdapterSpec> read_adapter_manifest(std::istream& in) {
    std::vector<AdapterSpec> adapters;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto j = detail_corpus::parse_line(line, line_no);
        if (j.contains("specialty")) {
            detail_corpus::reject_unknown_keys(j, {"specialty"}, line_no);
            auto code = detail_corpus::require_string(j, "specialty", line_no);
            auto s = parse_specialty(code);
            if (!s) throw SchemaError(line_no, "specialty", "unknown specialty code");
            adapters.push_back(AdapterSpec{*s, {}});
            continue;
        }
        if (adapters.empty()) throw SchemaError(line_no, "", "layer line before any specialty header");
        detail_corpus::reject_unknown_keys(j, {"layer", "d", "k", "r", "scale", "A", "B"}, line_no);
        LayerDelta delta;
        delta.name = detail_corpus::require_string(j, "layer", line_no);
        auto d = detail_corpus::require_int(j, "d", line_no);
        auto k = detail_corpus::require_int(j, "k", line_no);
        auto r = detail_corpus::require_int(j, "r", line_no);
        if (d < 1 || k < 1 || r < 1) throw SchemaError(line_no, "r", "non-positive dimension");
        auto scale_it = j.find("scale");
        if (scale_it == j.end() || !scale_it->is_number())
            throw SchemaError(line_no, "scale", "expected a number");
        delta.scale = scale_it->get<double>();
        auto read_matrix = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
            auto it = j.find(key);
            if (it == j.end() || !it->is_array())
                throw SchemaError(line_no, key, "expected a flat array");
            if (static_cast<Eigen::Index>(it->size()) != rows * cols)
                throw SchemaError(line_no, key,
                                  "expected " + std::to_string(rows * cols) + " entries, got " +
                                      std::to_string(it->size()));
            Matrix m(rows, cols);
            Eigen::Index idx = 0;
            for (const auto& v : *it) {
                if (!v.is_number()) throw SchemaError(line_no, key, "non-numeric entry");
                m.data()[idx++] = v.get<double>();
            }
            return m;
        };
        delta.A = read_matrix("A", static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
        delta.B = read_matrix("B", static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
        try {
            check_delta(delta);
        } catch (const ShapeMismatchError& e) {
            throw SchemaError(line_no, "layer", e.what());
        }
        adapters.back().deltas.push_back(std::move(delta));
    }
    return adapters;
}

inline std::vector<AdapterSpec> read_adapter_manifest(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + source.string());
    return read_adapter_manifest(in);
}

// ---------------------------------------------------------------------------
// Synthetic fixtures
//
// Ranks are placeholders (no published rank/α/target-layer values exist for
// the reference setup); entries are uniform in [−1, 1] from the seeded stream.

inline ModelSpec make_fixture_model() {
    ModelSpec model;
    model.param_count = 7'000'000'000;
    model.bytes_per_param = kDefaultBytesPerParam;
    model.layers = {
        {"attn.q", {64, 64}},
        {"attn.v", {64, 64}},
        {"mlp.up", {128, 64}},
    };
    return model;
}

inline AdapterSpec make_fixture_adapter(SubSpecialty specialty, const ModelSpec& model,
                                        std::uint64_t seed, Eigen::Index rank) {
    detail::Rng rng(detail::substream_seed(seed, static_cast<std::uint64_t>(specialty)));
    auto uniform = [&rng]() { return 2.0 * rng.unit() - 1.0; };
    AdapterSpec spec;
    spec.specialty = specialty;
    for (const auto& [name, shape] : model.layers) {
        LayerDelta delta;
        delta.name = name;
        delta.scale = 2.0 / static_cast<double>(rank);  // α = 2r convention
        delta.A = Matrix(rank, shape.k);
        delta.B = Matrix(shape.d, rank);
        for (Eigen::Index i = 0; i < delta.A.size(); ++i) delta.A.data()[i] = uniform();
        for (Eigen::Index i = 0; i < delta.B.size(); ++i) delta.B.data()[i] = uniform();
        spec.deltas.push_back(std::move(delta));
    }
    return spec;
}

// One adapter per specialty, ranks alternating 4 and 8.
inline std::vector<AdapterSpec> make_fixture_fleet(const ModelSpec& model, std::uint64_t seed) {
    std::vector<AdapterSpec> fleet;
    fleet.reserve(kAllSpecialties.size());
    for (std::size_t i = 0; i < kAllSpecialties.size(); ++i)
        fleet.push_back(
            make_fixture_adapter(kAllSpecialties[i], model, seed, i % 2 == 0 ? 4 : 8));
    return fleet;
}

}  // namespace medfleet
