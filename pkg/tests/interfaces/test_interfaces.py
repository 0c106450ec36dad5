from hdsvar.interface import FrozenObjectDict, FrozenSet

codes = FrozenObjectDict({"ok": 0, "usage": 2})
laws = FrozenSet({"student_t", "gaussian"})


class Test_misc_FrozenObjectDict:
    def test_misc_FrozenObjectDict_init(self):
        assert codes

    def test_misc_FrozenObjectDict_get_attribute(self):
        assert codes.usage == 2
        assert codes["usage"] == codes.usage

    def test_misc_FrozenObjectDict_len(self):
        assert len(codes) == 2

    def test_misc_FrozenObjectDict_in(self):
        assert "ok" in codes
        assert "data" not in codes


class Test_misc_FrozenSet:
    def test_misc_FrozenSet_init(self):
        assert laws

    def test_misc_FrozenSet_str(self):
        assert str(laws) == "{gaussian, student_t}"
