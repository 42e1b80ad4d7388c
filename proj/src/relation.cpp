#include "dspace/relation.hpp"

#include "dspace/error.hpp"

#include <algorithm>

namespace dspace {

PidList merge_pids(const PidList& a, const PidList& b)
{
    PidList out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

const FieldValue* Record::find(std::string_view field) const
{
    auto it = relevant.find(field);
    return it == relevant.end() ? nullptr : &it->second;
}

const FieldValue& Record::at(std::string_view field) const
{
    if (const FieldValue* v = find(field)) {
        return *v;
    }
    throw Error(ErrorCode::UnknownField, "record has no field '" + std::string(field) + "'");
}

Schema error_schema()
{
    return Schema::open_schema();
}

Relation ingest(const Schema& schema, const std::vector<Fields>& rows, PidAllocator& alloc)
{
    Relation rel(schema);
    rel.rows.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Fields& row = rows[i];
        if (row.size() != schema.size()) {
            throw Error(ErrorCode::SchemaMismatch,
                "row " + std::to_string(i) + " has " + std::to_string(row.size()) + " fields, schema has "
                    + std::to_string(schema.size()));
        }
        for (const Column& col : schema.columns()) {
            auto it = row.find(col.name);
            if (it == row.end()) {
                throw Error(ErrorCode::SchemaMismatch, "row " + std::to_string(i) + " lacks field '" + col.name + "'");
            }
            const auto type = it->second.type();
            if (type && *type != col.type) {
                throw Error(ErrorCode::SchemaMismatch,
                    "row " + std::to_string(i) + " field '" + col.name + "' is " + std::string(to_string(*type))
                        + ", expected " + std::string(to_string(col.type)));
            }
        }
        Record r;
        r.pids = { alloc.next() };
        r.relevant = row;
        rel.rows.push_back(std::move(r));
    }
    return rel;
}

Relation ingest(const Schema& schema, const std::vector<Fields>& rows)
{
    PidAllocator alloc;
    return ingest(schema, rows, alloc);
}

PidSet pids(const Relation& rel)
{
    PidSet out;
    for (const auto& r : rel.rows) {
        out.insert(r.pids.begin(), r.pids.end());
    }
    return out;
}

PidSet pids(const Stream& stream)
{
    PidSet out = pids(stream.correct);
    PidSet more = pids(stream.errors);
    out.insert(more.begin(), more.end());
    return out;
}

PidList pid_occurrences(const Relation& rel)
{
    PidList out;
    for (const auto& r : rel.rows) {
        out.insert(out.end(), r.pids.begin(), r.pids.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

Relation to_errors(const Relation& rel, const std::string& stage, const std::string& reason)
{
    if (stage.empty() || reason.empty()) {
        throw Error(ErrorCode::InvalidArgument, "error records need a stage and a reason");
    }
    Relation out(error_schema());
    out.rows.reserve(rel.rows.size());
    for (const auto& r : rel.rows) {
        Record e = r;
        e.notes.insert_or_assign(kErrorStage, FieldValue(stage));
        e.notes.insert_or_assign(kErrorReason, FieldValue(reason));
        out.rows.push_back(std::move(e));
    }
    return out;
}

std::vector<Fields> relevant_multiset(const Relation& rel)
{
    std::vector<Fields> out;
    out.reserve(rel.rows.size());
    for (const auto& r : rel.rows) {
        out.push_back(r.relevant);
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace dspace
