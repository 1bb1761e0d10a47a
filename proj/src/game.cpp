#include "framebench/game.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "framebench/error.hpp"

namespace framebench::game {

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        throw StructuralError("rational with zero denominator");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    num_ = g == 0 ? 0 : num / g;
    den_ = g == 0 ? 1 : den / g;
}

std::string Rational::str() const {
    if (den_ == 1) {
        return std::to_string(num_);
    }
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::parse(const std::string& text) {
    try {
        std::size_t used = 0;
        const auto slash = text.find('/');
        if (slash == std::string::npos) {
            const auto v = std::stoll(text, &used);
            if (used != text.size()) {
                throw StructuralError("trailing characters in payoff '" + text + "'");
            }
            return Rational(v);
        }
        const std::string a = text.substr(0, slash);
        const std::string b = text.substr(slash + 1);
        std::size_t used_b = 0;
        const auto n = std::stoll(a, &used);
        const auto d = std::stoll(b, &used_b);
        if (used != a.size() || used_b != b.size()) {
            throw StructuralError("malformed rational '" + text + "'");
        }
        return Rational(n, d);
    } catch (const std::logic_error&) {
        throw StructuralError("malformed payoff value '" + text + "'");
    }
}

namespace {

std::vector<Strategy> make_strategies(std::vector<std::string> labels, const char* who) {
    if (labels.empty()) {
        throw StructuralError(std::string("player ") + who + " has no strategies");
    }
    std::set<std::string> seen;
    std::vector<Strategy> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!seen.insert(labels[i]).second) {
            throw StructuralError(std::string("duplicate strategy label '") + labels[i] + "' for player " + who);
        }
        out.push_back(Strategy{std::move(labels[i]), i});
    }
    return out;
}

}  // namespace

PayoffMatrix::PayoffMatrix(std::vector<std::string> labels_p1, std::vector<std::string> labels_p2,
                           std::vector<std::vector<PayoffPair>> grid)
    : strategies_p1_(make_strategies(std::move(labels_p1), "1")),
      strategies_p2_(make_strategies(std::move(labels_p2), "2")),
      grid_(std::move(grid)) {
    if (grid_.size() != strategies_p1_.size()) {
        throw StructuralError("payoff grid has " + std::to_string(grid_.size()) + " rows, expected " +
                              std::to_string(strategies_p1_.size()));
    }
    for (const auto& row : grid_) {
        if (row.size() != strategies_p2_.size()) {
            throw StructuralError("payoff grid row has " + std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(strategies_p2_.size()));
        }
    }
}

const PayoffPair& PayoffMatrix::cell(std::size_t row, std::size_t col) const {
    if (row >= rows() || col >= cols()) {
        throw StructuralError("profile (" + std::to_string(row) + ", " + std::to_string(col) +
                              ") outside a " + std::to_string(rows()) + "x" + std::to_string(cols()) + " game");
    }
    return grid_[row][col];
}

StrategyProfile PayoffMatrix::profile(const std::string& label_p1, const std::string& label_p2) const {
    auto find = [](const std::vector<Strategy>& s, const std::string& label) {
        auto it = std::find_if(s.begin(), s.end(), [&](const Strategy& x) { return x.label == label; });
        if (it == s.end()) {
            throw StructuralError("unknown strategy label '" + label + "'");
        }
        return it->index;
    };
    return StrategyProfile{find(strategies_p1_, label_p1), find(strategies_p2_, label_p2)};
}

Rational payoff(const PayoffMatrix& matrix, const StrategyProfile& profile, Player player) {
    const auto& c = matrix.cell(profile.row, profile.col);
    return player == Player::One ? c.p1 : c.p2;
}

std::optional<Strategy> strictly_dominant_strategy(const PayoffMatrix& matrix, Player player) {
    const bool p1 = player == Player::One;
    const std::size_t own = p1 ? matrix.rows() : matrix.cols();
    const std::size_t other = p1 ? matrix.cols() : matrix.rows();
    auto u = [&](std::size_t mine, std::size_t theirs) {
        return p1 ? matrix.cell(mine, theirs).p1 : matrix.cell(theirs, mine).p2;
    };

    for (std::size_t s = 0; s < own; ++s) {
        bool dominates = true;
        for (std::size_t alt = 0; alt < own && dominates; ++alt) {
            if (alt == s) {
                continue;
            }
            for (std::size_t t = 0; t < other; ++t) {
                if (!(u(s, t) > u(alt, t))) {
                    dominates = false;
                    break;
                }
            }
        }
        // A single-strategy player trivially has no alternative to dominate.
        if (dominates && own > 1) {
            return matrix.strategies(player)[s];
        }
    }
    return std::nullopt;
}

std::vector<StrategyProfile> pure_nash_equilibria(const PayoffMatrix& matrix) {
    const std::size_t rows = matrix.rows();
    const std::size_t cols = matrix.cols();

    // Best-response sets: a profile is an equilibrium iff each choice attains
    // the maximum payoff against the other's choice.
    std::vector<Rational> best_p1(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        best_p1[c] = matrix.cell(0, c).p1;
        for (std::size_t r = 1; r < rows; ++r) {
            best_p1[c] = std::max(best_p1[c], matrix.cell(r, c).p1);
        }
    }
    std::vector<Rational> best_p2(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        best_p2[r] = matrix.cell(r, 0).p2;
        for (std::size_t c = 1; c < cols; ++c) {
            best_p2[r] = std::max(best_p2[r], matrix.cell(r, c).p2);
        }
    }

    std::vector<StrategyProfile> out;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& cell = matrix.cell(r, c);
            if (cell.p1 == best_p1[c] && cell.p2 == best_p2[r]) {
                out.push_back({r, c});
            }
        }
    }
    return out;
}

bool is_symmetric(const PayoffMatrix& matrix) {
    if (matrix.rows() != matrix.cols()) {
        return false;
    }
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t c = 0; c < matrix.cols(); ++c) {
            if (matrix.cell(r, c).p1 != matrix.cell(c, r).p2) {
                return false;
            }
        }
    }
    return true;
}

bool is_prisoners_dilemma(const PayoffMatrix& matrix) {
    if (matrix.rows() != 2 || matrix.cols() != 2) {
        throw DomainError("prisoner's dilemma check needs a 2x2 game, got " + std::to_string(matrix.rows()) + "x" +
                          std::to_string(matrix.cols()));
    }
    if (!is_symmetric(matrix)) {
        throw DomainError("prisoner's dilemma check needs a symmetric game");
    }
    // Either strategy may play the role of Cooperate; symmetry means checking
    // player 1 covers player 2.
    for (std::size_t coop = 0; coop < 2; ++coop) {
        const std::size_t defect = 1 - coop;
        const Rational reward = matrix.cell(coop, coop).p1;
        const Rational sucker = matrix.cell(coop, defect).p1;
        const Rational temptation = matrix.cell(defect, coop).p1;
        const Rational punishment = matrix.cell(defect, defect).p1;
        if (temptation > reward && reward > punishment && punishment > sucker) {
            return true;
        }
    }
    return false;
}

PayoffMatrix canonical_pd() {
    return PayoffMatrix({"Cooperate", "Defect"}, {"Cooperate", "Defect"},
                        {{{3, 3}, {0, 5}}, {{5, 0}, {1, 1}}});
}

GameAnalysis analyze(const PayoffMatrix& matrix) {
    GameAnalysis a;
    a.dominant_p1 = strictly_dominant_strategy(matrix, Player::One);
    a.dominant_p2 = strictly_dominant_strategy(matrix, Player::Two);
    a.pure_nash = pure_nash_equilibria(matrix);
    a.is_pd = matrix.rows() == 2 && matrix.cols() == 2 && is_symmetric(matrix) && is_prisoners_dilemma(matrix);
    return a;
}

namespace {

nlohmann::json rational_to_json(const Rational& r) {
    if (r.is_integer()) {
        return r.num();
    }
    return r.str();
}

Rational rational_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) {
        return Rational(j.get<std::int64_t>());
    }
    if (j.is_string()) {
        return Rational::parse(j.get<std::string>());
    }
    throw StructuralError("payoff entries must be integers or \"num/den\" strings, got " + j.dump());
}

}  // namespace

nlohmann::json to_json(const PayoffMatrix& matrix) {
    nlohmann::json j;
    auto labels = [](const std::vector<Strategy>& s) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& x : s) {
            out.push_back(x.label);
        }
        return out;
    };
    j["strategies_p1"] = labels(matrix.strategies(Player::One));
    j["strategies_p2"] = labels(matrix.strategies(Player::Two));
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < matrix.cols(); ++c) {
            const auto& cell = matrix.cell(r, c);
            row.push_back(nlohmann::json::array({rational_to_json(cell.p1), rational_to_json(cell.p2)}));
        }
        grid.push_back(std::move(row));
    }
    j["payoffs"] = std::move(grid);
    return j;
}

PayoffMatrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("strategies_p1") || !j.contains("strategies_p2") || !j.contains("payoffs")) {
        throw StructuralError("payoff matrix needs strategies_p1, strategies_p2 and payoffs");
    }
    auto labels_p1 = j.at("strategies_p1").get<std::vector<std::string>>();
    auto labels_p2 = j.at("strategies_p2").get<std::vector<std::string>>();
    std::vector<std::vector<PayoffPair>> grid;
    for (const auto& row : j.at("payoffs")) {
        std::vector<PayoffPair> cells;
        for (const auto& cell : row) {
            if (!cell.is_array() || cell.size() != 2) {
                throw StructuralError("payoff cell must be a pair, got " + cell.dump());
            }
            cells.push_back({rational_from_json(cell[0]), rational_from_json(cell[1])});
        }
        grid.push_back(std::move(cells));
    }
    return PayoffMatrix(std::move(labels_p1), std::move(labels_p2), std::move(grid));
}

PayoffMatrix resolve_matrix(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "canonical_pd") {
            return canonical_pd();
        }
        throw StructuralError("unknown built-in payoff matrix '" + j.get<std::string>() + "'");
    }
    return matrix_from_json(j);
}

}  // namespace framebench::game
