#include "dspace/decimal.hpp"

#include "dspace/error.hpp"

#include <cstdlib>

namespace dspace {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::UnknownPid: return "UnknownPid";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::UntagMissing: return "UntagMissing";
    case ErrorCode::MissingTag: return "MissingTag";
    case ErrorCode::JoinColumnMissing: return "JoinColumnMissing";
    case ErrorCode::CollisionAfterRename: return "CollisionAfterRename";
    case ErrorCode::FnNotTotal: return "FnNotTotal";
    case ErrorCode::ForbiddenFieldWrite: return "ForbiddenFieldWrite";
    case ErrorCode::DomainPredUnsound: return "DomainPredUnsound";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Overflow: return "Overflow";
    }
    return "Unknown";
}

namespace {

[[noreturn]] void overflow(const char* what)
{
    throw Error(ErrorCode::Overflow, std::string("decimal ") + what + " overflow");
}

std::int64_t narrow(__int128 v, const char* what)
{
    if (v > INT64_MAX || v < INT64_MIN) {
        overflow(what);
    }
    return static_cast<std::int64_t>(v);
}

// num / den rounded half away from zero; den > 0.
__int128 round_div(__int128 num, __int128 den)
{
    const bool neg = num < 0;
    const __int128 mag = neg ? -num : num;
    __int128 q = mag / den;
    if ((mag % den) * 2 >= den) {
        ++q;
    }
    return neg ? -q : q;
}

} // namespace

Decimal Decimal::from_int(std::int64_t value)
{
    return from_raw(narrow(static_cast<__int128>(value) * kScale, "conversion"));
}

std::optional<Decimal> Decimal::parse(std::string_view text)
{
    if (text.empty()) {
        return std::nullopt;
    }
    bool neg = false;
    std::size_t i = 0;
    if (text[0] == '-' || text[0] == '+') {
        neg = text[0] == '-';
        ++i;
    }
    __int128 whole = 0;
    int digits = 0;
    bool last_was_sep = false;
    for (; i < text.size() && text[i] != '.'; ++i) {
        const char c = text[i];
        if (c == ',') {
            if (digits == 0 || last_was_sep) {
                return std::nullopt;
            }
            last_was_sep = true;
            continue;
        }
        if (c < '0' || c > '9') {
            return std::nullopt;
        }
        last_was_sep = false;
        whole = whole * 10 + (c - '0');
        ++digits;
        if (whole > INT64_MAX) {
            return std::nullopt;
        }
    }
    if (digits == 0 || last_was_sep) {
        return std::nullopt;
    }
    __int128 frac = 0;
    int frac_digits = 0;
    if (i < text.size()) {
        ++i; // '.'
        if (i == text.size()) {
            return std::nullopt;
        }
        for (; i < text.size(); ++i) {
            const char c = text[i];
            if (c < '0' || c > '9' || frac_digits == kDigits) {
                return std::nullopt;
            }
            frac = frac * 10 + (c - '0');
            ++frac_digits;
        }
    }
    for (; frac_digits < kDigits; ++frac_digits) {
        frac *= 10;
    }
    __int128 raw = whole * kScale + frac;
    if (neg) {
        raw = -raw;
    }
    if (raw > INT64_MAX || raw < INT64_MIN) {
        return std::nullopt;
    }
    return from_raw(static_cast<std::int64_t>(raw));
}

std::string Decimal::to_string() const
{
    const bool neg = raw_ < 0;
    const unsigned __int128 mag = neg ? -static_cast<__int128>(raw_) : raw_;
    std::string out = std::to_string(static_cast<unsigned long long>(mag / kScale));
    auto frac = static_cast<unsigned>(mag % kScale);
    if (frac != 0) {
        std::string f = std::to_string(frac);
        f.insert(0, kDigits - f.size(), '0');
        while (!f.empty() && f.back() == '0') {
            f.pop_back();
        }
        out += '.';
        out += f;
    }
    return neg ? "-" + out : out;
}

Decimal Decimal::operator-() const
{
    return from_raw(narrow(-static_cast<__int128>(raw_), "negation"));
}

Decimal operator+(Decimal a, Decimal b)
{
    std::int64_t out;
    if (__builtin_add_overflow(a.raw_, b.raw_, &out)) {
        overflow("addition");
    }
    return Decimal::from_raw(out);
}

Decimal operator-(Decimal a, Decimal b)
{
    std::int64_t out;
    if (__builtin_sub_overflow(a.raw_, b.raw_, &out)) {
        overflow("subtraction");
    }
    return Decimal::from_raw(out);
}

Decimal operator*(Decimal a, Decimal b)
{
    const __int128 product = static_cast<__int128>(a.raw_) * b.raw_;
    return Decimal::from_raw(narrow(round_div(product, Decimal::kScale), "multiplication"));
}

Decimal Decimal::divided_by(Decimal divisor) const
{
    if (divisor.raw_ == 0) {
        throw Error(ErrorCode::InvalidArgument, "decimal division by zero");
    }
    __int128 num = static_cast<__int128>(raw_) * kScale;
    __int128 den = divisor.raw_;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    return from_raw(narrow(round_div(num, den), "division"));
}

Decimal Decimal::divided_by(std::int64_t divisor) const
{
    return divided_by(from_int(divisor));
}

} // namespace dspace
