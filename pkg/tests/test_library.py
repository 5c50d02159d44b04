from pathlib import Path

import pytest

from dexteleop.errors import (
    DuplicateTypeIdError,
    EmptyQueryError,
    LibraryFormatError,
    LibraryValidationError,
    TypeNotFoundError,
)
from dexteleop.library import (
    AttributeQuery,
    TaxonomyPath,
    add_type,
    load_library,
    parse_library,
    query_by_attributes,
    serialize_library,
    tokenize,
)

DATA = Path(__file__).parent / "data"


def test_bundled_library_has_thirty_types_four_subs(library):
    assert len(library) == 30
    assert len(library.sub_categories()) == 4


def test_bundled_postures_differ_somewhere(library):
    for t in library.types:
        assert t.stretch_posture != t.contract_posture, t.id


def test_serialize_parse_round_trip(library, hand_model):
    text = serialize_library(library)
    again = parse_library(text, hand_model)
    assert again == library


def test_get_type(library):
    assert library.get_type("cyl-thick").name == "Thick Cylinder Grasp"
    with pytest.raises(TypeNotFoundError) as err:
        library.get_type("no-such-type")
    assert "no-such-type" in str(err.value)
    with pytest.raises(TypeNotFoundError):
        library.get_type("")


def test_by_name_case_insensitive(library):
    t = library.by_name("tHICK cylinder grasp")
    assert t is not None and t.id == "cyl-thick"
    assert library.by_name("Nonexistent Grasp") is None


def test_missing_contract_posture_names_type(hand_model):
    with pytest.raises(LibraryValidationError) as err:
        load_library(DATA / "missing_contract.tt", hand_model)
    assert err.value.type_id == "cyl-thick"
    assert "contract_posture" in str(err.value)


def test_duplicate_id_rejected(hand_model):
    with pytest.raises(DuplicateTypeIdError) as err:
        load_library(DATA / "duplicate_id.tt", hand_model)
    assert err.value.type_id == "cyl-thick"


def test_dof_mismatch_rejected(hand_model):
    with pytest.raises(LibraryValidationError) as err:
        load_library(DATA / "dof_mismatch.tt", hand_model)
    assert "12" in str(err.value) and "16" in str(err.value)


def test_out_of_limits_rejected(hand_model):
    with pytest.raises(LibraryValidationError) as err:
        load_library(DATA / "out_of_limits.tt", hand_model)
    assert err.value.type_id == "cyl-thick"
    assert "limits" in str(err.value)


def test_bad_taxonomy_combo_rejected(hand_model):
    with pytest.raises(LibraryValidationError):
        load_library(DATA / "bad_taxonomy.tt", hand_model)


def test_empty_attribute_rejected(hand_model):
    with pytest.raises(LibraryValidationError) as err:
        load_library(DATA / "empty_attribute.tt", hand_model)
    assert err.value.field == "purpose"


def test_identical_postures_rejected(hand_model):
    with pytest.raises(LibraryValidationError):
        load_library(DATA / "identical_postures.tt", hand_model)


def test_unparseable_file_rejected(hand_model):
    with pytest.raises(LibraryFormatError):
        load_library(DATA / "not_yaml.tt", hand_model)


def test_taxonomy_rules():
    TaxonomyPath("single-hand", "general-grasp")
    TaxonomyPath("bimanual", "symmetric")
    with pytest.raises(LibraryValidationError):
        TaxonomyPath("bimanual", "non-grasp")
    with pytest.raises(LibraryValidationError):
        TaxonomyPath("single-hand", "asymmetric")


def test_add_type_returns_new_library(library, hand_model):
    t = library.get_type("cyl-thick")
    clone = type(t)(
        id="user-new",
        name="User Type",
        category=t.category,
        stretch_posture=t.stretch_posture,
        contract_posture=t.contract_posture,
        attributes=t.attributes,
        handedness="either",
    )
    bigger = add_type(library, clone, hand_model)
    assert len(bigger) == 31 and len(library) == 30
    with pytest.raises(DuplicateTypeIdError):
        add_type(bigger, clone, hand_model)


def test_tokenize_folds_case_and_drops_stopwords():
    assert tokenize("Pour the water FROM a kettle") == {"pour", "water", "kettle"}


def test_exact_attribute_query_ranks_type_first(library):
    for t in library.types:
        query = AttributeQuery(
            hand_posture=t.attributes.hand_posture,
            object_categories=" ".join(t.attributes.object_categories),
            contact_parts=" ".join(t.attributes.contact_parts),
            part_geometry=" ".join(t.attributes.part_geometry),
            grasp_direction=t.attributes.grasp_direction,
            purpose=t.attributes.purpose,
        )
        ranked = query_by_attributes(library, query)
        top, top_score = ranked[0]
        assert top.id == t.id
        assert top_score == max(score for _, score in ranked)


def test_zero_overlap_query_gives_id_order(library):
    ranked = query_by_attributes(library, AttributeQuery.from_text("zzz qqq xylophone"))
    assert all(score == 0.0 for _, score in ranked)
    ids = [t.id for t, _ in ranked]
    assert ids == sorted(ids)


def test_query_is_deterministic(library):
    q = AttributeQuery.from_text("thin handle, pour, wrap")
    a = query_by_attributes(library, q)
    b = query_by_attributes(library, q)
    assert [(t.id, s) for t, s in a] == [(t.id, s) for t, s in b]


def test_empty_query_rejected(library):
    with pytest.raises(EmptyQueryError):
        query_by_attributes(library, AttributeQuery())
    with pytest.raises(EmptyQueryError):
        query_by_attributes(library, AttributeQuery.from_text("the a of"))
