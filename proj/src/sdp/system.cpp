#include "nqcs/errors.hpp"
#include "nqcs/sdp.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace nqcs::sdp {

DenseMatrix AffineConstraint::evaluateRaw(const Vector& x) const {
    DenseMatrix f = constant;
    for (const Entry& e : entries) {
        const double v = x(e.var) * e.value;
        f(e.row, e.col) += v;
        if (e.row != e.col) {
            f(e.col, e.row) += v;
        }
    }
    return f;
}

DenseMatrix AffineConstraint::evaluate(const Vector& x) const {
    DenseMatrix f = evaluateRaw(x);
    if (sense == Sense::PositiveSemidefinite) {
        f = -f;
    }
    return f;
}

ConstraintBuilder::ConstraintBuilder(int size, std::string label, Sense sense)
    : size_(size), label_(std::move(label)), sense_(sense), constant_(DenseMatrix::Zero(size, size)) {
    if (size <= 0) {
        throw DimensionError("ConstraintBuilder: size must be positive");
    }
}

void ConstraintBuilder::add(int var, int r, int c, double value) {
    if (r < 0 || c < 0 || r >= size_ || c >= size_) {
        throw IndexError("ConstraintBuilder: entry outside the block");
    }
    if (value == 0.0) {
        return;
    }
    if (r > c) {
        std::swap(r, c);
    }
    if (var < 0) {
        constant_(r, c) += value;
        if (r != c) {
            constant_(c, r) += value;
        }
        return;
    }
    terms_[{var, r, c}] += value;
}

void ConstraintBuilder::addBlock(int var, int r0, int c0, const DenseMatrix& m) {
    if (r0 + m.rows() > size_ || c0 + m.cols() > size_) {
        throw DimensionError("ConstraintBuilder: block exceeds the constraint size");
    }
    if (r0 == c0) {
        if (m.rows() != m.cols()) {
            throw DimensionError("ConstraintBuilder: diagonal block must be square");
        }
        const double tol = 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
        if (((m - m.transpose()).cwiseAbs().array() > tol).any()) {
            throw DomainError("ConstraintBuilder: diagonal block is not symmetric");
        }
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = i; j < m.cols(); ++j) {
                add(var, r0 + static_cast<int>(i), c0 + static_cast<int>(j), m(i, j));
            }
        }
        return;
    }
    const bool overlap = r0 < c0 + m.cols() && c0 < r0 + m.rows();
    if (overlap) {
        throw DimensionError("ConstraintBuilder: off-diagonal block overlaps the diagonal");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            add(var, r0 + static_cast<int>(i), c0 + static_cast<int>(j), m(i, j));
        }
    }
}

AffineConstraint ConstraintBuilder::build() const {
    AffineConstraint c;
    c.label = label_;
    c.sense = sense_;
    c.constant = constant_;
    c.entries.reserve(terms_.size());
    for (const auto& [key, value] : terms_) {
        if (value != 0.0) {
            c.entries.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value});
        }
    }
    return c;
}

void AffineConstraintSystem::add(AffineConstraint c) {
    const DenseMatrix& f = c.constant;
    if (f.rows() != f.cols() || f.rows() == 0) {
        throw DimensionError("constraint '" + c.label + "': constant block must be square and non-empty");
    }
    const double tol = 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff());
    if (((f - f.transpose()).cwiseAbs().array() > tol).any()) {
        throw DomainError("constraint '" + c.label + "': constant block is not symmetric");
    }
    for (const Entry& e : c.entries) {
        if (e.var < 0 || e.var >= variables_) {
            throw IndexError("constraint '" + c.label + "': variable index out of range");
        }
        if (e.row < 0 || e.col < e.row || e.col >= f.rows()) {
            throw DomainError("constraint '" + c.label + "': coefficient entry must lie in the upper triangle");
        }
    }
    constraints_.push_back(std::move(c));
}

AffineConstraintSystem AffineConstraintSystem::withFixedVariable(int index, double value) const {
    if (index < 0 || index >= variables_) {
        throw IndexError("withFixedVariable: variable index out of range");
    }
    AffineConstraintSystem out(variables_);
    out.names_ = names_;
    for (const AffineConstraint& c : constraints_) {
        AffineConstraint f = c;
        f.entries.clear();
        for (const Entry& e : c.entries) {
            if (e.var == index) {
                f.constant(e.row, e.col) += value * e.value;
                if (e.row != e.col) {
                    f.constant(e.col, e.row) += value * e.value;
                }
            } else {
                f.entries.push_back(e);
            }
        }
        out.constraints_.push_back(std::move(f));
    }
    return out;
}

AffineConstraintSystem AffineConstraintSystem::scaled(double c) const {
    if (!(c > 0.0)) {
        throw DomainError("scaled: factor must be positive");
    }
    AffineConstraintSystem out = *this;
    for (AffineConstraint& k : out.constraints_) {
        k.constant *= c;
        for (Entry& e : k.entries) {
            e.value *= c;
        }
    }
    return out;
}

std::string statusName(SolveStatus s) {
    switch (s) {
        case SolveStatus::FeasibleWithMargin:
            return "feasibleWithMargin";
        case SolveStatus::MarginTooSmall:
            return "marginTooSmall";
        case SolveStatus::NotFoundWithinBudget:
            return "notFoundWithinBudget";
    }
    return "unknown";
}

std::string dumpSystem(const AffineConstraintSystem& system) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "# affine LMI system: F_k(x) = F_k0 + sum_v x_v F_kv, sense le means F_k(x) <= 0\n";
    os << "variables " << system.variableCount() << "\n";
    const auto& names = system.variableNames();
    for (size_t v = 0; v < names.size(); ++v) {
        os << "name " << v + 1 << " " << names[v] << "\n";
    }
    os << "constraints " << system.constraintCount() << "\n";
    int k = 0;
    for (const AffineConstraint& c : system.constraints()) {
        os << "constraint " << ++k << " " << c.size() << " "
           << (c.sense == Sense::NegativeSemidefinite ? "le" : "ge") << " " << (c.label.empty() ? "-" : c.label)
           << "\n";
        for (int r = 0; r < c.size(); ++r) {
            for (int col = r; col < c.size(); ++col) {
                if (c.constant(r, col) != 0.0) {
                    os << 0 << " " << r + 1 << " " << col + 1 << " " << c.constant(r, col) << "\n";
                }
            }
        }
        for (const Entry& e : c.entries) {
            os << e.var + 1 << " " << e.row + 1 << " " << e.col + 1 << " " << e.value << "\n";
        }
    }
    return os.str();
}

}  // namespace nqcs::sdp
