#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace framebench::game {

/// Exact payoff value. Always normalized: den > 0, gcd(|num|, den) == 1.
class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT(google-explicit-constructor)
    Rational(std::int64_t num, std::int64_t den);

    [[nodiscard]] std::int64_t num() const noexcept { return num_; }
    [[nodiscard]] std::int64_t den() const noexcept { return den_; }
    [[nodiscard]] bool is_integer() const noexcept { return den_ == 1; }
    [[nodiscard]] double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

    /// "3", "-1/2"
    [[nodiscard]] std::string str() const;
    static Rational parse(const std::string& text);

    friend bool operator==(const Rational& a, const Rational& b) noexcept {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept {
        const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
        const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
        return lhs <=> rhs;
    }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

struct Strategy {
    std::string label;
    std::size_t index = 0;

    friend bool operator==(const Strategy&, const Strategy&) = default;
};

enum class Player { One = 1, Two = 2 };

struct StrategyProfile {
    std::size_t row = 0;  ///< player 1's strategy index
    std::size_t col = 0;  ///< player 2's strategy index

    friend auto operator<=>(const StrategyProfile&, const StrategyProfile&) = default;
};

struct PayoffPair {
    Rational p1;
    Rational p2;

    friend bool operator==(const PayoffPair&, const PayoffPair&) = default;
};

/// Two-player normal-form game with complete information. Row player is
/// player 1. Construction validates shape and label uniqueness.
class PayoffMatrix {
public:
    PayoffMatrix(std::vector<std::string> labels_p1, std::vector<std::string> labels_p2,
                 std::vector<std::vector<PayoffPair>> grid);

    [[nodiscard]] std::size_t rows() const noexcept { return strategies_p1_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return strategies_p2_.size(); }
    [[nodiscard]] const std::vector<Strategy>& strategies(Player p) const noexcept {
        return p == Player::One ? strategies_p1_ : strategies_p2_;
    }
    [[nodiscard]] const PayoffPair& cell(std::size_t row, std::size_t col) const;

    /// Profile built from labels; throws StructuralError for unknown labels.
    [[nodiscard]] StrategyProfile profile(const std::string& label_p1, const std::string& label_p2) const;

    friend bool operator==(const PayoffMatrix&, const PayoffMatrix&) = default;

private:
    std::vector<Strategy> strategies_p1_;
    std::vector<Strategy> strategies_p2_;
    std::vector<std::vector<PayoffPair>> grid_;
};

struct GameAnalysis {
    std::optional<Strategy> dominant_p1;
    std::optional<Strategy> dominant_p2;
    std::vector<StrategyProfile> pure_nash;  ///< sorted row-major
    bool is_pd = false;
};

[[nodiscard]] Rational payoff(const PayoffMatrix& matrix, const StrategyProfile& profile, Player player);

[[nodiscard]] std::optional<Strategy> strictly_dominant_strategy(const PayoffMatrix& matrix, Player player);

[[nodiscard]] std::vector<StrategyProfile> pure_nash_equilibria(const PayoffMatrix& matrix);

/// T > R > P > S for both players of a symmetric 2x2 game. Row/column 0 is
/// read as the cooperative action. Throws DomainError if not 2x2 or not symmetric.
[[nodiscard]] bool is_prisoners_dilemma(const PayoffMatrix& matrix);

[[nodiscard]] bool is_symmetric(const PayoffMatrix& matrix);

/// (C,C)->(3,3), (C,D)->(0,5), (D,C)->(5,0), (D,D)->(1,1)
[[nodiscard]] PayoffMatrix canonical_pd();

/// is_pd is computed only for 2x2 symmetric games and false otherwise.
[[nodiscard]] GameAnalysis analyze(const PayoffMatrix& matrix);

/// {"strategies_p1": [...], "strategies_p2": [...], "payoffs": [[[u1,u2], ...], ...]}
/// Payoff entries are JSON integers or "num/den" strings.
[[nodiscard]] nlohmann::json to_json(const PayoffMatrix& matrix);
[[nodiscard]] PayoffMatrix matrix_from_json(const nlohmann::json& j);

/// Accepts the built-in name "canonical_pd" or an inline matrix object.
[[nodiscard]] PayoffMatrix resolve_matrix(const nlohmann::json& j);

}  // namespace framebench::game
