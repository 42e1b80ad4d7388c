#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dspace {

/// Exact fixed-point number with four fractional digits.
///
/// Measures are compared bit-exactly during conservation audits, so every
/// numeric payload goes through this type instead of binary floating point.
/// Arithmetic throws Error(Overflow) rather than wrapping.
class Decimal {
public:
    static constexpr std::int64_t kScale = 10000;
    static constexpr int kDigits = 4;

    constexpr Decimal() = default;

    static constexpr Decimal from_raw(std::int64_t raw)
    {
        Decimal d;
        d.raw_ = raw;
        return d;
    }
    static Decimal from_int(std::int64_t value);

    /// Accepts an optional sign, digits with optional ',' thousands
    /// separators, and up to four fractional digits. Nothing else.
    static std::optional<Decimal> parse(std::string_view text);

    constexpr std::int64_t raw() const { return raw_; }
    constexpr bool is_negative() const { return raw_ < 0; }
    constexpr bool is_zero() const { return raw_ == 0; }
    /// True when there is no fractional part.
    constexpr bool is_integral() const { return raw_ % kScale == 0; }
    std::int64_t truncated() const { return raw_ / kScale; }

    /// Canonical text: no trailing fractional zeros, no thousands separators.
    std::string to_string() const;

    Decimal operator-() const;
    friend Decimal operator+(Decimal a, Decimal b);
    friend Decimal operator-(Decimal a, Decimal b);
    /// Product rounded half away from zero to four digits.
    friend Decimal operator*(Decimal a, Decimal b);
    Decimal& operator+=(Decimal other) { return *this = *this + other; }

    /// Quotient rounded half away from zero; divisor must be nonzero.
    Decimal divided_by(Decimal divisor) const;
    Decimal divided_by(std::int64_t divisor) const;

    constexpr auto operator<=>(const Decimal&) const = default;

private:
    std::int64_t raw_ = 0;
};

} // namespace dspace
