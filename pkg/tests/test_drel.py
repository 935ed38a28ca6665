"""Dynamic relationships: conditional inheritance and its tie-breaks."""

import pytest

from keraia import KnowledgeBase, KnowledgeSource
from keraia.drel import DRel, active_drels, resolve_attribute
from keraia.errors import InheritanceCycle, Unresolvable


def helo_ship_kb():
    kb = KnowledgeBase()
    kb.put_cloud("Cloud-FC")
    kb.put_ks("Cloud-FC", KnowledgeSource("KS-Ship", slots={
        "speed": 18, "kinematics": {"heading": 90, "drift": 0.5}}))
    kb.put_ks("Cloud-FC", KnowledgeSource("KS-Helo", slots={
        "location": "KS-Ship"}))
    kb.drels.append(DRel(
        appellation="DRel-HeloAboard", source="KS-Ship", target="KS-Helo",
        shared=["speed", "kinematics"],
        condition="target.location == source.appellation"))
    return kb


class TestToggle:
    def test_aboard_inherits_and_departed_does_not(self):
        kb = helo_ship_kb()
        value, prov = resolve_attribute(kb, "KS-Helo", "speed")
        assert value == 18
        assert prov.kind == "inherited"
        assert prov.drel == "DRel-HeloAboard"
        assert prov.provider == "KS-Ship"

        kb.set_slot("KS-Helo", "location", "airborne")
        with pytest.raises(Unresolvable):
            resolve_attribute(kb, "KS-Helo", "speed")

        kb.set_slot("KS-Helo", "location", "KS-Ship")
        value, _ = resolve_attribute(kb, "KS-Helo", "speed")
        assert value == 18

    def test_departed_first_order(self):
        """Same toggle exercised starting from the detached state."""
        kb = helo_ship_kb()
        kb.set_slot("KS-Helo", "location", "airborne")
        with pytest.raises(Unresolvable):
            resolve_attribute(kb, "KS-Helo", "speed")
        kb.set_slot("KS-Helo", "location", "KS-Ship")
        assert resolve_attribute(kb, "KS-Helo", "speed")[0] == 18

    def test_active_drels_tracks_condition(self):
        kb = helo_ship_kb()
        assert [d.appellation for d in active_drels(kb, "KS-Helo")] == [
            "DRel-HeloAboard"]
        kb.set_slot("KS-Helo", "location", "airborne")
        assert active_drels(kb, "KS-Helo") == []


class TestResolution:
    def test_local_value_wins(self):
        kb = helo_ship_kb()
        kb.set_slot("KS-Helo", "speed", 140)
        value, prov = resolve_attribute(kb, "KS-Helo", "speed")
        assert value == 140
        assert prov.is_local

    def test_subtree_share(self):
        kb = helo_ship_kb()
        value, prov = resolve_attribute(kb, "KS-Helo", "kinematics/heading")
        assert value == 90
        assert prov.kind == "inherited"

    def test_unshared_attribute_not_inherited(self):
        kb = helo_ship_kb()
        kb.set_slot("KS-Ship", "displacement", 9800)
        with pytest.raises(Unresolvable):
            resolve_attribute(kb, "KS-Helo", "displacement")

    def test_priority_then_appellation(self):
        kb = KnowledgeBase()
        kb.put_cloud("Cloud-X")
        for name, fuel in (("KS-A", 1), ("KS-B", 2), ("KS-C", 3)):
            kb.put_ks("Cloud-X", KnowledgeSource(name, slots={"fuel": fuel}))
        kb.put_ks("Cloud-X", KnowledgeSource("KS-Needy"))
        kb.drels.append(DRel("DRel-b", "KS-B", "KS-Needy", ["fuel"], priority=5))
        kb.drels.append(DRel("DRel-a", "KS-A", "KS-Needy", ["fuel"], priority=5))
        kb.drels.append(DRel("DRel-c", "KS-C", "KS-Needy", ["fuel"], priority=9))
        value, prov = resolve_attribute(kb, "KS-Needy", "fuel")
        assert (value, prov.drel) == (3, "DRel-c")
        kb.drels = [d for d in kb.drels if d.appellation != "DRel-c"]
        value, prov = resolve_attribute(kb, "KS-Needy", "fuel")
        assert (value, prov.drel) == (1, "DRel-a")


class TestMultiHop:
    def chain_kb(self):
        kb = KnowledgeBase()
        kb.put_cloud("Cloud-X")
        kb.put_ks("Cloud-X", KnowledgeSource("KS-A"))
        kb.put_ks("Cloud-X", KnowledgeSource("KS-B"))
        kb.put_ks("Cloud-X", KnowledgeSource("KS-C", slots={"range": 400}))
        kb.drels.append(DRel("DRel-ab", "KS-B", "KS-A", ["range"]))
        kb.drels.append(DRel("DRel-bc", "KS-C", "KS-B", ["range"]))
        return kb

    def test_single_hop_default_stops_short(self):
        with pytest.raises(Unresolvable):
            resolve_attribute(self.chain_kb(), "KS-A", "range")

    def test_multi_hop_walks_the_chain(self):
        value, prov = resolve_attribute(self.chain_kb(), "KS-A", "range",
                                        multi_hop=True)
        assert value == 400
        assert prov.hops == ("KS-B", "KS-C")

    def test_cycle_detected(self):
        kb = self.chain_kb()
        kb.ks("KS-C").slots.clear()
        kb.drels.append(DRel("DRel-ca", "KS-A", "KS-C", ["range"]))
        with pytest.raises(InheritanceCycle):
            resolve_attribute(kb, "KS-A", "range", multi_hop=True)
