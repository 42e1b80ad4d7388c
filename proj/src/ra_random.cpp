#include "dspace/ra.hpp"

#include "dspace/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dspace {

struct CaseGenerator::Impl {
    std::mt19937_64& rng;
    const GeneratorOptions& opt;
    std::map<std::string, Relation> inputs;
    std::map<std::string, Schema> schemas;
    PidAllocator pids;
    int next_column = 0;
    int next_relation = 0;

    std::size_t pick(std::size_t lo, std::size_t hi)
    {
        return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
    }

    bool chance(int percent) { return static_cast<int>(rng() % 100) < percent; }

    /// Skewed index into a domain of `n` values: small indexes dominate.
    std::size_t skewed(std::size_t n)
    {
        const std::size_t a = pick(0, n - 1);
        const std::size_t b = pick(0, n - 1);
        return std::min(a, b);
    }

    std::string fresh_column() { return "c" + std::to_string(++next_column); }

    ValueType random_type()
    {
        static constexpr ValueType types[] = { ValueType::Integer, ValueType::Integer, ValueType::Text,
            ValueType::Decimal, ValueType::Quantity };
        return types[pick(0, 4)];
    }

    FieldValue random_value(ValueType t)
    {
        static const std::vector<std::string> texts { "a", "b", "c", "d" };
        static const std::vector<std::int64_t> decimals_raw { 5000, 12500, 20000, -15000, 0 };
        static const std::vector<std::string> units { "kg", "l" };
        switch (t) {
        case ValueType::Integer: return FieldValue(static_cast<std::int64_t>(skewed(5)) - 1);
        case ValueType::Text: return FieldValue(texts[skewed(texts.size())]);
        case ValueType::Decimal: return FieldValue(Decimal::from_raw(decimals_raw[skewed(decimals_raw.size())]));
        case ValueType::Quantity: {
            const auto amount = static_cast<std::int64_t>(skewed(3)) + 1;
            return FieldValue::quantity(Decimal::from_int(amount), units[skewed(units.size())]);
        }
        }
        return FieldValue::missing("null");
    }

    FieldValue random_cell(ValueType t)
    {
        if (chance(8)) return FieldValue::missing(chance(50) ? "null" : "unknown");
        return random_value(t);
    }

    RAExpr base(const std::vector<Column>& cols, std::size_t budget)
    {
        const std::string name = "r" + std::to_string(++next_relation);
        const Schema schema(cols);
        const std::size_t rows = pick(0, std::min(opt.max_rows, std::max<std::size_t>(budget, 1)));
        std::vector<Fields> data;
        for (std::size_t i = 0; i < rows; ++i) {
            Fields f;
            for (const auto& c : cols) f.emplace(c.name, random_cell(c.type));
            data.push_back(std::move(f));
        }
        inputs.emplace(name, ingest(schema, data, pids));
        schemas.emplace(name, schema);
        return RAExpr::base(name);
    }

    std::vector<Column> fresh_columns(std::size_t lo, std::size_t hi)
    {
        std::vector<Column> cols;
        const std::size_t n = pick(lo, hi);
        for (std::size_t i = 0; i < n; ++i) cols.push_back(Column { fresh_column(), random_type(), {} });
        return cols;
    }

    Schema schema_of(const RAExpr& e) { return ra_schema(e, schemas); }

    template <typename T>
    std::vector<T> subset(const std::vector<T>& xs, std::size_t lo, std::size_t hi)
    {
        std::vector<T> out;
        std::vector<std::size_t> idx(xs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t n = pick(std::min(lo, xs.size()), std::min(hi, xs.size()));
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) out.push_back(xs[i]);
        return out;
    }

    Predicate atom(const Schema& s)
    {
        const auto& cols = s.columns();
        const Column& c = cols[pick(0, cols.size() - 1)];
        switch (pick(0, 5)) {
        case 0: return Predicate::present(c.name);
        case 1: return Predicate::in(c.name, { random_value(c.type), random_value(c.type) });
        case 2: {
            std::vector<const Column*> same;
            for (const auto& o : cols) {
                if (o.type == c.type && o.name != c.name) same.push_back(&o);
            }
            if (!same.empty()) {
                const Column* o = same[pick(0, same.size() - 1)];
                return Predicate::compare(Predicate::Op::Eq, ValueExpr::ref(c.name), ValueExpr::ref(o->name));
            }
            [[fallthrough]];
        }
        default: {
            static constexpr Predicate::Op ops[] = { Predicate::Op::Eq, Predicate::Op::Ne, Predicate::Op::Lt,
                Predicate::Op::Le, Predicate::Op::Gt, Predicate::Op::Ge };
            const Predicate::Op op = ops[pick(0, 5)];
            return Predicate::compare(op, ValueExpr::ref(c.name), ValueExpr::lit(random_value(c.type)));
        }
        }
    }

    Predicate predicate(const Schema& s)
    {
        switch (pick(0, 4)) {
        case 0: return Predicate::all_of({ atom(s), atom(s) });
        case 1: return Predicate::any_of({ atom(s), atom(s) });
        case 2: return Predicate::negate(atom(s));
        default: return atom(s);
        }
    }

    /// Renames clashing columns of `r` so it can sit beside `l`.
    RAExpr separate(const Schema& l, RAExpr r)
    {
        std::vector<std::pair<std::string, std::string>> mapping;
        const Schema rs = schema_of(r);
        for (const auto& c : rs.columns()) {
            if (l.has(c.name)) mapping.emplace_back(c.name, fresh_column());
        }
        return mapping.empty() ? r : RAExpr::rename(std::move(r), std::move(mapping));
    }

    RAExpr gen(std::size_t depth, std::size_t budget)
    {
        if (depth <= 1 || chance(12)) return base(fresh_columns(1, opt.max_columns), budget);
        const std::size_t d = depth - 1;
        const std::size_t half = std::max<std::size_t>(budget / 2, 1);
        const std::size_t root = std::max<std::size_t>(static_cast<std::size_t>(std::sqrt(static_cast<double>(budget) / 3)), 1);

        switch (pick(0, 11)) {
        case 0: {
            RAExpr in = gen(d, budget);
            const Schema s = schema_of(in);
            auto keep = subset(s.names(), 1, s.size());
            return RAExpr::project(std::move(in), std::move(keep));
        }
        case 1: {
            RAExpr in = gen(d, budget);
            Predicate p = predicate(schema_of(in));
            return RAExpr::select(std::move(in), std::move(p));
        }
        case 2: {
            RAExpr in = gen(d, budget);
            std::vector<std::pair<std::string, std::string>> mapping;
            for (const auto& n : subset(schema_of(in).names(), 1, 2)) mapping.emplace_back(n, fresh_column());
            return RAExpr::rename(std::move(in), std::move(mapping));
        }
        case 3: {
            RAExpr l = gen(d, root);
            // One level is held back for the rename separate() may add.
            RAExpr r = separate(schema_of(l), gen(std::max<std::size_t>(d - 1, 1), root));
            return RAExpr::cross(std::move(l), std::move(r));
        }
        case 4: {
            RAExpr l = gen(d, root);
            std::vector<Column> cols;
            for (const auto& c : subset(schema_of(l).columns(), 1, 2)) cols.push_back(c);
            for (auto& c : fresh_columns(0, 2)) cols.push_back(std::move(c));
            RAExpr r = base(cols, root);
            return RAExpr::natural_join(std::move(l), std::move(r));
        }
        case 5: {
            RAExpr l = gen(d, root);
            const Schema ls = schema_of(l);
            RAExpr r = separate(ls, gen(std::max<std::size_t>(d - 1, 1), root));
            Schema rs = schema_of(r);
            std::vector<std::pair<std::string, std::string>> on;
            for (const auto& a : ls.columns()) {
                for (const auto& b : rs.columns()) {
                    if (a.type == b.type && on.empty()) on.emplace_back(a.name, b.name);
                }
            }
            if (on.empty()) {
                const Column& key = ls.columns()[pick(0, ls.size() - 1)];
                std::vector<Column> cols { Column { fresh_column(), key.type, {} } };
                for (auto& c : fresh_columns(0, 2)) cols.push_back(std::move(c));
                r = base(cols, root);
                on.emplace_back(key.name, cols.front().name);
            }
            return RAExpr::outer_join(std::move(l), std::move(r), std::move(on));
        }
        case 6:
        case 7:
        case 8:
        case 9: {
            RAExpr l = gen(d, half);
            const Schema ls = schema_of(l);
            // Operands share the left schema, and inputs stay within max_columns.
            if (ls.size() > opt.max_columns) return RAExpr::project(std::move(l), subset(ls.names(), 1, opt.max_columns));
            RAExpr r = gen_with_schema(ls, d, half);
            switch (pick(0, 3)) {
            case 0: return RAExpr::set_union(std::move(l), std::move(r));
            case 1: return RAExpr::union_all(std::move(l), std::move(r));
            case 2: return RAExpr::minus(std::move(l), std::move(r));
            default: return RAExpr::intersect(std::move(l), std::move(r));
            }
        }
        case 10: {
            RAExpr in = gen(d, budget);
            const Schema s = schema_of(in);
            std::vector<std::string> candidates;
            for (const auto& n : s.names()) {
                if (n != kCountColumn) candidates.push_back(n);
            }
            auto group = subset(candidates, 0, 2);
            std::vector<AggSpec> specs;
            std::set<std::string> names;
            for (const auto& c : subset(s.columns(), 1, 2)) {
                static constexpr AggKind numeric[] = { AggKind::Count, AggKind::Sum, AggKind::Min, AggKind::Max,
                    AggKind::Avg, AggKind::Ids };
                static constexpr AggKind textual[] = { AggKind::Count, AggKind::Ids };
                const AggKind k = c.type == ValueType::Text ? textual[pick(0, 1)] : numeric[pick(0, 5)];
                AggSpec spec { c.name, k, {} };
                if (names.insert(spec.output_name()).second && !s.has(spec.output_name())) specs.push_back(spec);
            }
            return RAExpr::aggregate(std::move(in), std::move(group), std::move(specs));
        }
        default: {
            RAExpr in = gen(d, budget);
            const Schema s = schema_of(in);
            std::vector<const Column*> numeric;
            for (const auto& c : s.columns()) {
                if (c.type != ValueType::Text) numeric.push_back(&c);
            }
            if (numeric.empty()) {
                Predicate p = predicate(s);
                return RAExpr::select(std::move(in), std::move(p));
            }
            const Column* a = numeric[pick(0, numeric.size() - 1)];
            ValueExpr rhs = chance(50) ? ValueExpr::ref(numeric[pick(0, numeric.size() - 1)]->name)
                                       : ValueExpr::lit(random_value(chance(70) ? a->type : ValueType::Integer));
            ValueExpr lhs = ValueExpr::ref(a->name);
            ValueExpr e;
            switch (pick(0, 2)) {
            case 0: e = ValueExpr::add(lhs, rhs); break;
            case 1: e = ValueExpr::sub(lhs, rhs); break;
            default: e = ValueExpr::mul(lhs, rhs); break;
            }
            return RAExpr::map(std::move(in), { { fresh_column(), e } });
        }
        }
    }

    /// Expression whose output has exactly `schema`.
    RAExpr gen_with_schema(const Schema& schema, std::size_t depth, std::size_t budget)
    {
        const std::vector<Column> cols = schema.columns();
        if (depth <= 1) return base(cols, budget);
        const std::size_t d = depth - 1;
        switch (pick(0, 5)) {
        case 0: return RAExpr::select(gen_with_schema(schema, d, budget), predicate(schema));
        case 1: {
            if (cols.size() >= opt.max_columns) return base(cols, budget);
            std::vector<Column> wide = cols;
            for (auto& c : fresh_columns(1, opt.max_columns - cols.size())) wide.push_back(std::move(c));
            return RAExpr::project(base(wide, budget), schema.names());
        }
        case 2: {
            const std::size_t half = std::max<std::size_t>(budget / 2, 1);
            RAExpr l = gen_with_schema(schema, d, half);
            RAExpr r = gen_with_schema(schema, d, half);
            switch (pick(0, 3)) {
            case 0: return RAExpr::set_union(std::move(l), std::move(r));
            case 1: return RAExpr::union_all(std::move(l), std::move(r));
            case 2: return RAExpr::minus(std::move(l), std::move(r));
            default: return RAExpr::intersect(std::move(l), std::move(r));
            }
        }
        default: return base(cols, budget);
        }
    }
};

CaseGenerator::CaseGenerator(std::uint64_t seed, GeneratorOptions options)
    : rng_(seed)
    , options_(options)
{
}

RandomCase CaseGenerator::next()
{
    Impl impl { rng_, options_, {}, {}, PidAllocator {}, 0, 0 };
    RAExpr expr = impl.gen(options_.max_depth, options_.max_intermediate);
    // Some branches draw an operand and then replace it; drop such inputs.
    std::set<std::string> used;
    std::vector<const RAExpr*> todo { &expr };
    while (!todo.empty()) {
        const RAExpr* e = todo.back();
        todo.pop_back();
        if (e->kind == RAExpr::Kind::Base) used.insert(e->name);
        for (const auto& a : e->args) todo.push_back(&a);
    }
    std::erase_if(impl.inputs, [&](const auto& kv) { return !used.contains(kv.first); });
    return RandomCase { std::move(expr), std::move(impl.inputs) };
}

} // namespace dspace
