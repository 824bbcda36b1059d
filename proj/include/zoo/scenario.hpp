#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace zoo {

/// Thrown when inputs fail validation (bad shapes, out-of-range values).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a requested computation exceeds a size guard.
struct capacity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an optimization backend fails to converge.
struct solver_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace tol {
constexpr double kIngest = 1e-12;     // box normalization / nonnegativity on ingest
constexpr double kNoSignalling = 1e-9;
constexpr double kCertificate = 1e-8; // certificate reconstruction residual
constexpr double kLpFeas = 1e-8;
constexpr double kSdpGap = 1e-7;
} // namespace tol

/// Shape of a Bell scenario: how many parties, and per party how many
/// inputs and how many outputs (uniform across that party's inputs).
class Scenario {
  public:
    Scenario() = default;
    Scenario(std::vector<int> inputs, std::vector<int> outputs)
        : inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
        if (inputs_.empty() || inputs_.size() != outputs_.size())
            throw validation_error("scenario: party count mismatch");
        for (std::size_t p = 0; p < inputs_.size(); ++p) {
            if (inputs_[p] < 1) throw validation_error("scenario: inputs must be >= 1");
            if (outputs_[p] < 2) throw validation_error("scenario: outputs must be >= 2");
        }
        // overflow-checked table size
        std::size_t t = 1;
        auto mul = [&t](int v) {
            std::size_t w = t * static_cast<std::size_t>(v);
            if (w / static_cast<std::size_t>(v) != t)
                throw capacity_error("scenario: probability table overflows");
            t = w;
        };
        for (int v : inputs_) mul(v);
        for (int v : outputs_) mul(v);
        if (t > (std::size_t(1) << 40)) throw capacity_error("scenario: table too large");
    }

    /// All parties share the same arities.
    static Scenario uniform(int parties, int inputs, int outputs) {
        return Scenario(std::vector<int>(parties, inputs), std::vector<int>(parties, outputs));
    }

    int parties() const { return static_cast<int>(inputs_.size()); }
    int inputs(int party) const { return inputs_.at(party); }
    int outputs(int party) const { return outputs_.at(party); }
    const std::vector<int>& input_arities() const { return inputs_; }
    const std::vector<int>& output_arities() const { return outputs_; }

    std::size_t joint_inputs() const { return product(inputs_); }
    std::size_t joint_outcomes() const { return product(outputs_); }
    std::size_t table_size() const { return joint_inputs() * joint_outcomes(); }

    /// Mixed-radix packing, party 0 most significant.
    std::size_t pack_inputs(const std::vector<int>& x) const { return pack(x, inputs_); }
    std::size_t pack_outcomes(const std::vector<int>& a) const { return pack(a, outputs_); }
    std::vector<int> unpack_inputs(std::size_t idx) const { return unpack(idx, inputs_); }
    std::vector<int> unpack_outcomes(std::size_t idx) const { return unpack(idx, outputs_); }

    /// Flat table index; outcome index runs fastest within each input block.
    std::size_t flat(std::size_t input_idx, std::size_t outcome_idx) const {
        return input_idx * joint_outcomes() + outcome_idx;
    }

    bool operator==(const Scenario& o) const {
        return inputs_ == o.inputs_ && outputs_ == o.outputs_;
    }
    bool operator!=(const Scenario& o) const { return !(*this == o); }

    std::string describe() const {
        std::string s;
        for (int m : inputs_) s += std::to_string(m);
        for (int d : outputs_) s += std::to_string(d);
        return s; // e.g. "2222" for the two-party two-input two-output scenario
    }

  private:
    static std::size_t product(const std::vector<int>& v) {
        std::size_t t = 1;
        for (int x : v) t *= static_cast<std::size_t>(x);
        return t;
    }
    static std::size_t pack(const std::vector<int>& digits, const std::vector<int>& radix) {
        if (digits.size() != radix.size()) throw validation_error("pack: arity mismatch");
        std::size_t idx = 0;
        for (std::size_t p = 0; p < digits.size(); ++p) {
            if (digits[p] < 0 || digits[p] >= radix[p]) throw validation_error("pack: digit out of range");
            idx = idx * static_cast<std::size_t>(radix[p]) + static_cast<std::size_t>(digits[p]);
        }
        return idx;
    }
    static std::vector<int> unpack(std::size_t idx, const std::vector<int>& radix) {
        std::vector<int> digits(radix.size());
        for (std::size_t p = radix.size(); p-- > 0;) {
            digits[p] = static_cast<int>(idx % static_cast<std::size_t>(radix[p]));
            idx /= static_cast<std::size_t>(radix[p]);
        }
        return digits;
    }

    std::vector<int> inputs_, outputs_;
};

} // namespace zoo
