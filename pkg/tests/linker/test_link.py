import pytest
import yaml

from capmachine.assembler import parse
from capmachine.errors import ImageError, LinkError
from capmachine.isa import PC, R_STK, Capability, Locality, Perm, format_word
from capmachine.linker import (
    ComponentLayout,
    Layout,
    ObjectImage,
    build_component,
    format_image,
    format_object,
    layout_to_dict,
    link,
    load_layout,
    parse_image,
    parse_object,
    read_flag,
)
from capmachine.machine import Status, run
from tests.helper import cap

CALLER = """\
.unit caller
.import target
.export start
.flag ok seen
start: fetch r1 target
    jmp r1
"""

CALLEE = """\
.unit callee
.export target
.flag done
.init done int 5
target: halt
"""

LAYOUT = Layout(
    components={
        "caller": ComponentLayout(code=1000, link=100, flags=200),
        "callee": ComponentLayout(code=2000, link=110, flags=210),
    },
    regions={"stack": (8000, 8063)},
    registers={"r_stk": "cap rwlx local 8000 8063 7999"},
    entry="start",
)


@pytest.fixture
def objects() -> list[ObjectImage]:
    return [build_component(parse(CALLER)), build_component(parse(CALLEE))]


def test_build_component(objects):
    caller, callee = objects
    assert caller.name == "caller"
    assert caller.imports == ["target"]
    assert caller.exports == {"start": 2}
    assert caller.code[:2] == [0, 0]
    assert caller.flags == ["ok", "seen"]
    assert callee.flag_init == {"done": 5}


def test_build_component_overrides_flags():
    obj = build_component(parse(CALLEE), flags=["done", "extra"])
    assert obj.flags == ["done", "extra"]


def test_duplicate_export():
    with pytest.raises(LinkError):
        build_component(parse(".export a a\na: halt"))


def test_export_in_header():
    with pytest.raises(LinkError):
        ObjectImage(name="bad", code=[0, 0, 0], exports={"x": 1})


def test_link_headers_and_tables(objects):
    image = link(objects, LAYOUT)
    caller = image.components["caller"]
    assert caller.link == (100, 100)
    assert caller.flags == (200, 201)
    assert image.memory[1000] == cap(Perm.ro, 100, 100, 100)
    assert image.memory[1001] == cap(Perm.rw, 200, 201, 200)
    assert image.memory[200] == 0 and image.memory[201] == 0
    assert image.memory[210] == 5

    callee_lo, callee_hi = image.components["callee"].code
    assert image.entries["target"] == cap(Perm.e, callee_lo, callee_hi, callee_lo + 2)
    assert image.memory[100] == image.entries["target"]


def test_link_empty_tables(objects):
    image = link(objects, LAYOUT)
    callee = image.components["callee"]
    assert callee.link == (110, 109)
    header = image.memory[2000]
    assert isinstance(header, Capability)
    assert (header.base, header.end) == (110, 109)


def test_initial_conf(objects):
    image = link(objects, LAYOUT)
    conf = image.initial_conf()
    assert conf[R_STK] == cap(Perm.rwlx, 8000, 8063, 7999, Locality.local)
    pc = conf[PC]
    assert isinstance(pc, Capability)
    assert (pc.perm, pc.addr) == (Perm.rx, 1002)
    assert image.initial_conf("target")[PC] == cap(Perm.rx, 2000, 2002, 2002)
    with pytest.raises(ImageError):
        image.initial_conf("nowhere")


def test_linked_system_runs(objects):
    image = link(objects, LAYOUT)
    outcome = run(image.initial_conf(), 1000)
    assert outcome.status is Status.HALTED
    assert outcome.mem is not None
    assert read_flag(outcome.mem, image, "callee", "done") == 5
    assert read_flag(outcome.mem, image, "caller", "ok") == 0


def test_read_flag_rejects_capability(objects):
    image = link(objects, LAYOUT)
    mem = image.memory.updated({200: cap(Perm.rw, 0, 0, 0)})
    with pytest.raises(ImageError):
        read_flag(mem, image, "caller", "ok")


def test_flag_resolution(objects):
    image = link(objects, LAYOUT)
    assert image.flag_address("caller", "seen") == 201
    assert image.resolve_flag("done") == ("callee", "done")
    assert image.resolve_flag("caller.ok") == ("caller", "ok")
    with pytest.raises(ImageError):
        image.resolve_flag("missing")
    with pytest.raises(ImageError):
        image.resolve_flag("callee.ok")
    with pytest.raises(ImageError):
        image.flag_address("nobody", "ok")


def test_overlap_is_rejected(objects):
    layout = Layout(
        components={
            "caller": ComponentLayout(code=1000, link=100, flags=200),
            "callee": ComponentLayout(code=1003, link=110, flags=210),
        }
    )
    with pytest.raises(LinkError, match="Overlapping"):
        link(objects, layout)


def test_region_overlap_is_rejected(objects):
    layout = Layout(components=LAYOUT.components, regions={"heap": (1005, 1100)})
    with pytest.raises(LinkError, match="Overlapping"):
        link(objects, layout)


def test_unresolved_import(objects):
    with pytest.raises(LinkError, match="Unresolved"):
        link(objects[:1], Layout(components=LAYOUT.components))


def test_import_of_non_entry():
    caller = build_component(parse(".unit caller\n.import inner\nhalt"))
    callee = build_component(parse(".unit callee\ninner: halt"))
    with pytest.raises(LinkError, match="not an entry"):
        link([caller, callee], Layout(components=LAYOUT.components))


def test_missing_component_layout(objects):
    with pytest.raises(LinkError, match="No layout"):
        link(objects, Layout(components={"caller": LAYOUT.components["caller"]}))


def test_bad_layout_register(objects):
    with pytest.raises(LinkError):
        link(objects, Layout(components=LAYOUT.components, registers={"r99": "int 0"}))
    with pytest.raises(LinkError):
        link(objects, Layout(components=LAYOUT.components, registers={"r1": "cap zz"}))


def test_image_text_format(objects):
    image = link(objects, LAYOUT)
    text = format_image(image)
    assert "component caller code 1000 1012 link 100 100 flags 200 201 ok seen" in text
    assert f"entry target {format_word(image.entries['target'])}" in text
    assert "reg r_stk cap rwlx local 8000 8063 7999" in text
    assert parse_image(text) == image


@pytest.mark.parametrize(
    "text",
    [
        "bogus line",
        "component a code 0 1 link 2 3",
        "entry start int 4",
        "reg r77 int 0",
        "12: cap rw global 0",
    ],
)
def test_parse_image_errors(text):
    with pytest.raises(ImageError):
        parse_image(text)


def test_object_text_format(objects):
    caller = objects[0]
    text = format_object(caller)
    assert text.startswith("caller:\n")
    assert "import target" in text
    assert "export start 2" in text
    assert parse_object(text) == caller


@pytest.mark.parametrize(
    "text",
    [
        "",
        "import x",
        "a:\nimport",
        "a:\nflagperm rwz",
        "a:\nword 0 cap rw",
        "a:\nexport x 2\nexport x 3",
        "a:\nexport x 0\nword 0 int 0",
    ],
)
def test_parse_object_errors(text):
    with pytest.raises(LinkError):
        parse_object(text)


def test_load_layout(tmp_path):
    path = tmp_path / "layout.yaml"
    path.write_text(yaml.dump(layout_to_dict(LAYOUT)))
    assert load_layout(str(path)) == LAYOUT


def test_load_layout_rejects_python_tags(tmp_path):
    """Layouts are plain data; object tags are not constructed."""
    path = tmp_path / "layout.yaml"
    path.write_text("components: !!python/object:collections.OrderedDict {}\n")
    with pytest.raises(yaml.YAMLError):
        load_layout(str(path))
