#pragma once

#include <cstdint>
#include <string>

namespace adtool {

enum class UnaryKind : std::uint8_t {
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Erfc,
    Recip,
    PowConst,
};

// PowConst carries its integer exponent; every other kind ignores it.
struct UnaryOp {
    UnaryKind kind = UnaryKind::Neg;
    int exponent = 0;

    friend bool operator==(const UnaryOp&, const UnaryOp&) = default;
};

inline UnaryOp unary(UnaryKind kind) { return UnaryOp{kind, 0}; }
inline UnaryOp pow_op(int exponent) { return UnaryOp{UnaryKind::PowConst, exponent}; }

enum class BinaryOp : std::uint8_t { Add, Sub, Mul };

std::string op_name(const UnaryOp& op);
const char* op_name(BinaryOp op);

} // namespace adtool
