// Shared generators and fixtures for the test suites.
#pragma once

#include "dspace/io.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dspace::testing {

inline std::string data_path(const std::string& rel) { return std::string(DSPACE_DATA_DIR) + "/" + rel; }

/// Ingests one bundled CSV with its sidecar schema.
inline Stream load_csv(const std::string& dir, const std::string& name, PidAllocator& pids)
{
    const CsvSchema schema = csv_schema_from_json(json::parse(read_file(data_path(dir + "/" + name + ".schema.json"))));
    return ingest_csv(name, read_file(data_path(dir + "/" + name + ".csv")), schema, pids);
}

inline Relation ship_items()
{
    PidAllocator pids;
    return load_csv("ship", "items", pids).correct;
}

/// Monoid matching the elements Gen::element draws for `kind`.
inline InformationMonoid monoid_for(MonoidKind kind)
{
    switch (kind) {
    case MonoidKind::Count: return monoids::count();
    case MonoidKind::Sum: return monoids::sum("kg");
    case MonoidKind::Min: return monoids::min("kg");
    case MonoidKind::Max: return monoids::max("kg");
    case MonoidKind::AvgPair: return monoids::avg();
    case MonoidKind::SetOfIds: return monoids::ids();
    case MonoidKind::Paccioli: return monoids::paccioli();
    case MonoidKind::Tuple: return monoids::product({ monoids::count(), monoids::max("kg"), monoids::ids() });
    }
    return monoids::count();
}

class Gen {
public:
    explicit Gen(std::uint64_t seed)
        : rng_(seed)
    {
    }

    std::int64_t range(std::int64_t lo, std::int64_t hi)
    {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
    }
    bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
    template <typename T>
    const T& pick(const std::vector<T>& xs)
    {
        return xs[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(xs.size()) - 1))];
    }

    /// Decimal with up to four fractional digits, magnitude below 10^8.
    Decimal decimal(bool non_negative = false)
    {
        const std::int64_t raw = range(non_negative ? 0 : -1'000'000'000'000, 1'000'000'000'000);
        return Decimal::from_raw(raw);
    }

    /// Small decimals drawn from a narrow set, so equal values are common.
    Decimal small_decimal()
    {
        const std::int64_t raw = range(-8, 8) * 2500;
        return Decimal::from_raw(raw);
    }

    MonoidElement element(MonoidKind kind)
    {
        switch (kind) {
        case MonoidKind::Count: return MonoidElement::count(range(0, 1'000'000));
        case MonoidKind::Sum: return MonoidElement::sum(decimal(), "kg");
        case MonoidKind::Min: return chance(0.1) ? MonoidElement::min_unit("kg") : MonoidElement::min(decimal(), "kg");
        case MonoidKind::Max: return chance(0.1) ? MonoidElement::max_unit("kg") : MonoidElement::max(decimal(), "kg");
        case MonoidKind::AvgPair: {
            const std::int64_t n = range(0, 100);
            return MonoidElement::avg(n == 0 ? Decimal {} : decimal(), n);
        }
        case MonoidKind::SetOfIds: {
            std::set<std::string> ids;
            for (char c = 'a'; c <= 'h'; ++c) {
                if (chance(0.3)) ids.insert(std::string(1, c));
            }
            return MonoidElement::ids(std::move(ids));
        }
        case MonoidKind::Paccioli: {
            Decimal d = decimal(true);
            Decimal c = decimal(true);
            return MonoidElement::paccioli(d, c);
        }
        case MonoidKind::Tuple: {
            MonoidElement a = element(MonoidKind::Count);
            MonoidElement b = element(MonoidKind::Max);
            MonoidElement c = element(MonoidKind::SetOfIds);
            return MonoidElement::tuple({ a, b, c });
        }
        }
        return MonoidElement::count(0);
    }

    /// Relation over (id, name, amount, qty, unit) with duplicates and a
    /// sprinkling of Missing cells.
    Relation relation(std::size_t max_rows, PidAllocator& pids)
    {
        const Schema schema({ { "id", ValueType::Integer, {} }, { "name", ValueType::Text, {} },
            { "amount", ValueType::Decimal, {} }, { "qty", ValueType::Quantity, {} }, { "unit", ValueType::Text, {} } });
        std::vector<Fields> rows;
        const std::int64_t n = range(0, static_cast<std::int64_t>(max_rows));
        const std::vector<std::string> names { "a", "b", "c", "d" };
        const std::vector<std::string> units { "kg", "l" };
        for (std::int64_t i = 0; i < n; ++i) {
            Fields f;
            f.emplace("id", FieldValue(range(0, 5)));
            f.emplace("name", chance(0.1) ? FieldValue::missing("unknown") : FieldValue(pick(names)));
            f.emplace("amount", chance(0.1) ? FieldValue::missing("null") : FieldValue(small_decimal()));
            const std::string& u = pick(units);
            f.emplace("qty", FieldValue::quantity(Decimal::from_int(range(0, 9)), u));
            f.emplace("unit", FieldValue(u));
            rows.push_back(std::move(f));
        }
        return ingest(schema, rows, pids);
    }

    /// Random assignment of each row to one of `k` parts.
    std::vector<Relation> split(const Relation& rel, std::size_t k)
    {
        std::vector<Relation> parts(k, Relation(rel.schema));
        for (const auto& r : rel.rows) parts[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(k) - 1))].rows.push_back(r);
        return parts;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// (field, value, pid) triples of every relevant and irrelevant cell.
inline std::multiset<std::tuple<std::string, FieldValue, Pid>> cell_triples(const Relation& rel)
{
    std::multiset<std::tuple<std::string, FieldValue, Pid>> out;
    for (const auto& r : rel.rows) {
        for (Pid p : r.pids) {
            for (const auto& [k, v] : r.relevant) out.emplace(k, v, p);
        }
        for (const auto& ir : r.irrelevant) {
            for (Pid p : ir.pids) {
                for (const auto& [k, v] : ir.fields) out.emplace(k, v, p);
            }
        }
    }
    return out;
}

} // namespace dspace::testing
